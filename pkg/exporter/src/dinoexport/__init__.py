"""Dense per-patch image features in the travmap binary grid format.

Wraps the pretrained DINOv2 small backbone (patch 14): a 700x700 RGB image
becomes a 50x50 grid of 384-d patch embeddings, written bit-compatibly
with the downstream pipeline's feature reader.  A deterministic
patch-statistics backbone is included for environments without the
pretrained weights (and for tests).
"""

from .export import ExportSettings, export_features, preprocess_image, write_grid
from .backbones import BackboneUnavailableError, Dinov2Backbone, PatchStatsBackbone

__all__ = [
    "ExportSettings",
    "export_features",
    "preprocess_image",
    "write_grid",
    "BackboneUnavailableError",
    "Dinov2Backbone",
    "PatchStatsBackbone",
]

__version__ = "0.1.0"
