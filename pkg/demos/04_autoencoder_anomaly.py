"""Reconstruction-based anomaly scoring.

Trains the bottlenecked MLP on vectors from one terrain cluster only, then
scores held-out vectors from that cluster against vectors from an unseen
cluster.  Familiar terrain reconstructs well; unfamiliar terrain does not.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from travmap import autoencoder as ae

rng = np.random.default_rng(1)
mu_seen = rng.uniform(-0.5, 0.5, size=384)
mu_unseen = mu_seen + (rng.integers(0, 2, 384) * 2 - 1)  # 1.0 apart in L-inf

train = (mu_seen + 0.1 * rng.standard_normal((400, 384))).astype(np.float32)
held = (mu_seen + 0.1 * rng.standard_normal((150, 384))).astype(np.float32)
unseen = (mu_unseen + 0.1 * rng.standard_normal((150, 384))).astype(np.float32)

model, history = ae.train(train, ae.TrainConfig(epochs=40, seed=0))
print(f"training loss: {history.train_loss[0]:.4f} -> {history.train_loss[-1]:.4f}")

loss_seen = ae.reconstruction_losses(model, held)
loss_unseen = ae.reconstruction_losses(model, unseen)
print(f"mean loss, familiar terrain:   {loss_seen.mean():.4f}")
print(f"mean loss, unfamiliar terrain: {loss_unseen.mean():.4f}")
print(f"separation ratio: {loss_unseen.mean() / loss_seen.mean():.1f}x")

fig, ax = plt.subplots(figsize=(6, 4))
bins = np.logspace(np.log10(loss_seen.min()), np.log10(loss_unseen.max()), 40)
ax.hist(loss_seen, bins=bins, alpha=0.7, label="familiar")
ax.hist(loss_unseen, bins=bins, alpha=0.7, label="unfamiliar")
ax.set_xscale("log")
ax.set_xlabel("reconstruction loss")
ax.set_ylabel("count")
ax.legend()
ax.set_title("anomaly separation by reconstruction loss")
fig.savefig("demo_anomaly.png", dpi=110, bbox_inches="tight")
print("wrote demo_anomaly.png")
