"""Feature backbones: the pretrained ViT and a deterministic stand-in.

A backbone maps a preprocessed float RGB image (H, W, 3) in [0, 1] to an
(H/patch, W/patch, dim) grid of patch embeddings, row-major patch order
(grid cell (r, c) describes image pixels [14r:14r+14, 14c:14c+14]).
"""

from __future__ import annotations

import numpy as np

_IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


class BackboneUnavailableError(RuntimeError):
    """The pretrained weights (or torch/transformers) are not available."""


class Dinov2Backbone:
    """Pretrained DINOv2 small: 384-d embeddings, patch size 14.

    Loads lazily through transformers; raises BackboneUnavailableError with
    a clear message when torch/transformers or the weights are missing.
    """

    patch_size = 14
    dim = 384

    def __init__(self, model_name: str = "facebook/dinov2-small", half: bool = False):
        try:
            import torch
            from transformers import Dinov2Model
        except ImportError as exc:
            raise BackboneUnavailableError(
                "torch and transformers are required for the dinov2 backbone "
                "(pip install 'dinoexport[dinov2]')"
            ) from exc
        try:
            self._model = Dinov2Model.from_pretrained(model_name)
        except Exception as exc:
            raise BackboneUnavailableError(
                f"could not load pretrained weights {model_name!r}: {exc}"
            ) from exc
        self._torch = torch
        self._model.eval()
        self.half = half
        if half:
            self._model.half()

    def __call__(self, image: np.ndarray) -> np.ndarray:
        torch = self._torch
        h, w = image.shape[:2]
        gh, gw = h // self.patch_size, w // self.patch_size
        x = (image.astype(np.float32) - _IMAGENET_MEAN) / _IMAGENET_STD
        tensor = torch.from_numpy(x.transpose(2, 0, 1)[None])
        if self.half:
            tensor = tensor.half()
        with torch.no_grad():
            out = self._model(pixel_values=tensor).last_hidden_state
        tokens = out[0, 1:, :]  # drop the CLS token; patches are row-major
        grid = tokens.float().cpu().numpy().reshape(gh, gw, self.dim)
        return grid.astype(np.float32)


class PatchStatsBackbone:
    """Deterministic stand-in: per-patch color/texture statistics projected
    into the embedding space by a fixed random matrix.

    Not a learned model, but patches with different color or texture land
    at different embeddings, which is the property the downstream pipeline
    relies on.  Used for tests and for running the toolchain offline.
    """

    patch_size = 14
    dim = 384

    _N_STATS = 12

    def __init__(self, half: bool = False, seed: int = 12345):
        self.half = half
        rng = np.random.default_rng(seed)
        self._projection = (
            rng.standard_normal((self._N_STATS, self.dim)) / np.sqrt(self._N_STATS)
        ).astype(np.float32)

    def _patch_stats(self, image: np.ndarray) -> np.ndarray:
        p = self.patch_size
        h, w = image.shape[:2]
        gh, gw = h // p, w // p
        img = image[: gh * p, : gw * p].astype(np.float32)

        def pool(values):
            return values.reshape(gh, p, gw, p, 3).mean(axis=(1, 3))

        dx = np.zeros_like(img)
        dx[:, :-1] = np.abs(np.diff(img, axis=1))
        dy = np.zeros_like(img)
        dy[:-1, :] = np.abs(np.diff(img, axis=0))
        patches = img.reshape(gh, p, gw, p, 3)
        means = patches.mean(axis=(1, 3))
        stds = patches.std(axis=(1, 3))
        return np.concatenate([means, stds, pool(dx), pool(dy)], axis=2)  # (gh, gw, 12)

    def __call__(self, image: np.ndarray) -> np.ndarray:
        stats = self._patch_stats(image)
        proj = self._projection
        if self.half:
            stats = stats.astype(np.float16)
            proj = proj.astype(np.float16)
        grid = np.tanh(stats @ proj)
        return grid.astype(np.float32)


def make_backbone(name: str, half: bool = False):
    if name == "dinov2":
        return Dinov2Backbone(half=half)
    if name == "stub":
        return PatchStatsBackbone(half=half)
    raise ValueError(f"unknown backbone {name!r} (choose dinov2 or stub)")
