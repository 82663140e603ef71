import numpy as np
import pytest


def synth_natural_image(h: int, w: int, seed: int) -> np.ndarray:
    """Colorful smooth-blob image standing in for a natural photo."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:h, 0:w].astype(float)
    img = np.zeros((h, w, 3))
    for _ in range(24):
        cx, cy = rng.uniform(0, w), rng.uniform(0, h)
        s = rng.uniform(12, w / 3)
        blob = np.exp(-(((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s)))
        img += blob[..., None] * rng.uniform(0, 255, 3)
    img += rng.uniform(0, 25, (h, w, 3))
    return np.clip(img / img.max((0, 1)) * 255, 0, 255).astype(np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
