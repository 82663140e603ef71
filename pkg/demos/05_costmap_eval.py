"""From reconstruction losses to a thresholded costmap.

Builds a feature grid whose top half matches the training distribution and
whose bottom half does not, infers segment- and pixel-mode cost images,
sweeps the traversability threshold against ground truth and reports the
best cutoff.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from travmap import autoencoder as ae
from travmap import costmap as cm
from travmap.features import FeatureGrid
from travmap.superpixel import SegmentMask

rng = np.random.default_rng(4)
dim = 64
mu = rng.uniform(-0.5, 0.5, size=dim)
train = (mu + 0.1 * rng.standard_normal((400, dim))).astype(np.float32)
model, _ = ae.train(train, ae.TrainConfig(epochs=60, seed=0),
                    layer_sizes=[dim, 48, 24, 12, 24, 48, dim])

top = mu + 0.1 * rng.standard_normal((25, 50, dim))
bottom = (mu + 1.2) + 0.1 * rng.standard_normal((25, 50, dim))
grid = FeatureGrid(np.concatenate([top, bottom]).astype(np.float32))

row_band = np.repeat(np.arange(4), 13)[:50]
col_band = np.repeat(np.arange(5), 10)
labels = row_band[:, None] * 5 + col_band[None, :]  # 20 rectangular segments
mask = SegmentMask.from_labels(labels)

seg_cost = cm.infer_cost_image(model, grid, mask, mode="segment")
pix_cost = cm.infer_cost_image(model, grid, mask, mode="pixel")
print(f"segment-mode cost: top half {seg_cost.values[:25].mean():.4f}, "
      f"bottom half {seg_cost.values[25:].mean():.4f}")

gt = cm.GroundTruthMask(
    np.vstack([np.ones((25, 50)), np.full((25, 50), 2)]).astype(np.uint8)
)
best, curve = cm.tune_threshold([pix_cost], [gt])
print(f"best threshold {best:.2f} at accuracy {dict(curve)[best]:.4f}")
res = cm.evaluate_accuracy(cm.traversable_mask(pix_cost, best), gt)
print(f"confusion: tt={res.true_traversable} ft={res.false_traversable} "
      f"tb={res.true_blocked} fb={res.false_blocked}")

fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
axes[0].imshow(seg_cost.values, cmap="RdYlGn_r", vmin=0, vmax=1)
axes[0].set_title("segment-mode cost")
axes[1].imshow(pix_cost.values, cmap="RdYlGn_r", vmin=0, vmax=1)
axes[1].set_title("pixel-mode cost")
axes[2].plot(*zip(*curve))
axes[2].axvline(best, ls="--", c="k")
axes[2].set_xlabel("threshold")
axes[2].set_ylabel("accuracy")
axes[2].set_title("threshold sweep")
fig.savefig("demo_costmap.png", dpi=110, bbox_inches="tight")
print("wrote demo_costmap.png")
