"""Terrain-traversability estimation from walked trajectories.

The pipeline: project future poses into each frame (geometry), segment the
frame into superpixels (superpixel), pool per-segment feature vectors along
the walked path (features), train a reconstruction autoencoder on those
positive examples only (autoencoder), turn reconstruction losses into
normalized cost images (costmap) and export cost-annotated point clouds
for a local planner (cloudexport).  synthgen closes the loop with a fully
synthetic dataset generator; cli exposes everything as subcommands.
"""

__version__ = "0.1.0"
