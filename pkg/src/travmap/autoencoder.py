"""Fully connected encoder-decoder MLP trained to reconstruct feature vectors.

The network is symmetric around a 32-unit bottleneck
([384, 256, 128, 64, 32, 64, 128, 256, 384]) with ReLU between layers and a
linear output so reconstructions can take negative values.  Terrain the
model was trained on reconstructs with low mean squared error; unfamiliar
terrain reconstructs poorly, which is the anomaly signal downstream.

Backpropagation is analytic (the ReLU subgradient at 0 is taken as 0) and
checked against central finite differences in the test suite.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    MissingInputError,
    NumericError,
    ShapeMismatchError,
    TruncatedFileError,
    VersionMismatchError,
)

LAYER_SIZES = [384, 256, 128, 64, 32, 64, 128, 256, 384]

MODEL_MAGIC = b"STEPPMLP"
MODEL_VERSION = 1


@dataclass
class MlpModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]  # weights[k] has shape (sizes[k+1], sizes[k])
    biases: list[np.ndarray]
    norm_mean: Optional[np.ndarray] = None  # set when trained with standardization
    norm_scale: Optional[np.ndarray] = None
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("weights/biases do not chain through layer_sizes")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_sizes[k + 1], self.layer_sizes[k])
            if w.shape != want:
                raise ValueError(f"weights[{k}] has shape {w.shape}, expected {want}")
            if b.shape != (self.layer_sizes[k + 1],):
                raise ValueError(f"biases[{k}] has shape {b.shape}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("parameters must be finite")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]


def init_model(
    layer_sizes: Sequence[int] | None = None,
    seed: int = 0,
    dtype=np.float32,
) -> MlpModel:
    """He-style uniform init scaled by fan-in, seeded; biases start at zero."""
    sizes = list(layer_sizes) if layer_sizes is not None else list(LAYER_SIZES)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return MlpModel(sizes, weights, biases)


def forward(model: MlpModel, f: np.ndarray) -> np.ndarray:
    """Deterministic forward pass; accepts a single vector or a (B, D) batch."""
    x = np.asarray(f)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.shape[1] != model.input_dim:
        raise ValueError(f"input dim {a.shape[1]} != model dim {model.input_dim}")
    a = a.astype(model.weights[0].dtype, copy=False)
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = a @ w.T + b
        if k < last:
            a = np.maximum(a, 0.0)
    return a[0] if single else a


def reconstruction_loss(f: np.ndarray, f_hat: np.ndarray) -> float:
    """Mean squared error over the vector's dimensions."""
    f = np.asarray(f, dtype=np.float64)
    f_hat = np.asarray(f_hat, dtype=np.float64)
    if f.shape != f_hat.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {f_hat.shape}")
    return float(np.mean((f - f_hat) ** 2))


def reconstruction_losses(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Per-sample reconstruction loss for a (B, D) batch, applying the
    model's stored standardization (if any) before the forward pass."""
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if model.norm_mean is not None:
        x = (x - model.norm_mean) / model.norm_scale
    x_hat = forward(model, x.astype(model.weights[0].dtype))
    return np.mean((x - x_hat.astype(np.float64)) ** 2, axis=1)


def _forward_trace(model: MlpModel, a0: np.ndarray):
    """Forward pass keeping pre-activations for backprop."""
    acts = [a0]
    pre = []
    last = len(model.weights) - 1
    a = a0
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = np.maximum(z, 0.0) if k < last else z
        acts.append(a)
    return acts, pre


def gradients(model: MlpModel, batch: np.ndarray):
    """Analytic gradient of the mean batch reconstruction loss.

    Returns (loss, grads_w, grads_b) with gradients matching the parameter
    shapes.  Targets are the inputs themselves.
    """
    x = np.atleast_2d(np.asarray(batch, dtype=model.weights[0].dtype))
    if x.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    if x.shape[1] != model.input_dim:
        raise ValueError(f"input dim {x.shape[1]} != model dim {model.input_dim}")
    B, N = x.shape
    acts, pre = _forward_trace(model, x)
    resid = acts[-1] - x
    loss = float(np.mean(resid.astype(np.float64) ** 2))

    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    delta = resid * (2.0 / (B * N))  # d(mean loss)/d(output pre-activation)
    for k in range(len(model.weights) - 1, -1, -1):
        grads_w[k] = delta.T @ acts[k]
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ model.weights[k]) * (pre[k - 1] > 0)
    return loss, grads_w, grads_b


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 256
    seed: int = 0
    optimizer: str = "adam"  # "adam" or "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    validation_fraction: float = 0.0
    standardize: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in [0, 1)")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainHistory:
    train_loss: list[float]
    val_loss: list[float]  # empty when validation_fraction == 0


def train(
    dataset: np.ndarray,
    config: TrainConfig | None = None,
    layer_sizes: Sequence[int] | None = None,
) -> tuple[MlpModel, TrainHistory]:
    """Mini-batch reconstruction training; reproducible given (dataset, config)."""
    config = config or TrainConfig()
    X = np.asarray(dataset, dtype=np.float32)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("dataset must be a non-empty (N, D) array")
    sizes = list(layer_sizes) if layer_sizes is not None else list(LAYER_SIZES)
    if sizes[0] != X.shape[1] or sizes[-1] != X.shape[1]:
        raise ValueError(
            f"dataset dim {X.shape[1]} does not match layer chain {sizes[0]}->{sizes[-1]}"
        )

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(X.shape[0])
    n_val = int(round(X.shape[0] * config.validation_fraction))
    val = X[perm[:n_val]]  # kept in raw feature space
    trn = X[perm[n_val:]]
    if trn.shape[0] == 0:
        raise ValueError("validation split left no training samples")

    model = init_model(sizes, seed=config.seed)
    if config.standardize:
        mean = trn.mean(axis=0, dtype=np.float64)
        scale = trn.std(axis=0, dtype=np.float64)
        scale[scale < 1e-8] = 1.0
        model.norm_mean = mean
        model.norm_scale = scale
        trn = ((trn - mean) / scale).astype(np.float32)

    m_w = [np.zeros_like(w, dtype=np.float64) for w in model.weights]
    v_w = [np.zeros_like(w, dtype=np.float64) for w in model.weights]
    m_b = [np.zeros_like(b, dtype=np.float64) for b in model.biases]
    v_b = [np.zeros_like(b, dtype=np.float64) for b in model.biases]
    step = 0

    history = TrainHistory([], [])
    for epoch in range(config.epochs):
        order = rng.permutation(trn.shape[0])
        total = 0.0
        for start in range(0, trn.shape[0], config.batch_size):
            batch = trn[order[start : start + config.batch_size]]
            loss, gw, gb = gradients(model, batch)
            if not np.isfinite(loss):
                raise NumericError(
                    f"training loss became non-finite at epoch {epoch}, "
                    f"batch {start // config.batch_size} (lr={config.learning_rate})"
                )
            total += loss * batch.shape[0]
            step += 1
            if config.optimizer == "adam":
                b1, b2 = config.beta1, config.beta2
                corr1 = 1.0 - b1**step
                corr2 = 1.0 - b2**step
                for k in range(len(model.weights)):
                    for g, p, m, v in (
                        (gw[k], model.weights[k], m_w[k], v_w[k]),
                        (gb[k], model.biases[k], m_b[k], v_b[k]),
                    ):
                        m *= b1
                        m += (1 - b1) * g
                        v *= b2
                        v += (1 - b2) * np.square(g, dtype=np.float64)
                        update = (m / corr1) / (np.sqrt(v / corr2) + config.eps)
                        p -= (config.learning_rate * update).astype(p.dtype)
            else:
                for k in range(len(model.weights)):
                    model.weights[k] -= (config.learning_rate * gw[k]).astype(
                        model.weights[k].dtype
                    )
                    model.biases[k] -= (config.learning_rate * gb[k]).astype(
                        model.biases[k].dtype
                    )
        history.train_loss.append(total / trn.shape[0])
        if n_val:
            history.val_loss.append(float(reconstruction_losses(model, val).mean()))

    model.metadata.update(
        optimizer=config.optimizer,
        learning_rate=repr(config.learning_rate),
        epochs=str(config.epochs),
        batch_size=str(config.batch_size),
        seed=str(config.seed),
        standardize=str(config.standardize),
        final_train_loss=repr(history.train_loss[-1]),
    )
    return model, history


# ---------------------------------------------------------------------------
# Persistence


def save_model(model: MlpModel, path) -> None:
    n = len(model.layer_sizes)
    parts = [MODEL_MAGIC, struct.pack("<II", MODEL_VERSION, n)]
    parts.append(struct.pack(f"<{n}I", *model.layer_sizes))
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    meta = dict(model.metadata)
    if model.norm_mean is not None:
        meta["norm_mean"] = ",".join(repr(float(v)) for v in model.norm_mean)
        meta["norm_scale"] = ",".join(repr(float(v)) for v in model.norm_scale)
    text = "".join(f"{k}={v}\n" for k, v in sorted(meta.items())).encode("utf-8")
    parts.append(struct.pack("<I", len(text)))
    parts.append(text)
    Path(path).write_bytes(b"".join(parts))


def load_model(path, expected_layer_sizes: Sequence[int] | None = None) -> MlpModel:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"model file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < 16:
        raise TruncatedFileError(f"{path}: shorter than header")
    if blob[:8] != MODEL_MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:8]!r}")
    version, n = struct.unpack_from("<II", blob, 8)
    if version != MODEL_VERSION:
        raise VersionMismatchError(f"{path}: unsupported version {version}")
    off = 16
    if len(blob) < off + 4 * n:
        raise TruncatedFileError(f"{path}: truncated layer-size table")
    sizes = list(struct.unpack_from(f"<{n}I", blob, off))
    off += 4 * n
    if expected_layer_sizes is not None and sizes != list(expected_layer_sizes):
        raise ShapeMismatchError(
            f"{path}: layer sizes {sizes} != expected {list(expected_layer_sizes)}"
        )
    weights, biases = [], []
    for k in range(n - 1):
        nw = sizes[k + 1] * sizes[k]
        nb = sizes[k + 1]
        need = (nw + nb) * 4
        if len(blob) < off + need:
            raise TruncatedFileError(f"{path}: truncated parameters at layer {k}")
        weights.append(
            np.frombuffer(blob, dtype="<f4", count=nw, offset=off)
            .reshape(sizes[k + 1], sizes[k])
            .copy()
        )
        off += nw * 4
        biases.append(np.frombuffer(blob, dtype="<f4", count=nb, offset=off).copy())
        off += nb * 4
    if len(blob) < off + 4:
        raise TruncatedFileError(f"{path}: missing metadata length")
    (meta_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    if len(blob) != off + meta_len:
        raise TruncatedFileError(f"{path}: metadata block size mismatch")
    meta: dict[str, str] = {}
    for line in blob[off:].decode("utf-8").splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k] = v
    model = MlpModel(sizes, weights, biases, metadata=meta)
    if "norm_mean" in meta:
        model.norm_mean = np.array([float(v) for v in meta.pop("norm_mean").split(",")])
        model.norm_scale = np.array([float(v) for v in meta.pop("norm_scale").split(",")])
    return model
