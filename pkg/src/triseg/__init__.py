"""Tri-planar consensus segmentation of bilateral structures.

Three orientation-specific networks segment every slice of a volume; their
probability maps are averaged, thresholded, and reduced to the two largest
components. A synthetic phantom generator makes the whole pipeline testable
end to end without clinical data.
"""

from .consensus import fuse, postprocess, predict_heatmap, segment_volume, threshold_heatmap
from .errors import (
    ConfigurationError,
    DimensionalityError,
    DivergenceError,
    GeometryError,
    NiftiFormatError,
    ShapeError,
    TransferError,
    TrisegError,
    UnsupportedDtypeError,
)
from .geometry import ALL_ORIENTATIONS, Orientation, center_crop, e2d_channels, pad_back
from .labeling import component_sizes, keep_largest, label_components
from .metrics import dice_coefficient, precision_recall
from .network import (
    E2DUNet,
    NetworkConfig,
    build_network,
    load_checkpoint,
    load_encoder_bank,
    random_encoder_bank,
    save_checkpoint,
    save_encoder_bank,
    transfer_encoder_weights,
)
from .phantom import PhantomConfig, generate_phantom, phantom_seed, split_counts
from .sampler import PatchSource, TrainingSampler, border_pixels_2d, extract_window
from .training import TrainConfig, dice_loss, lr_at_epoch, train_network, validate_slices
from .volume_io import (
    BinaryMask,
    ScalarVolume,
    load_mask,
    load_volume,
    minmax_normalize,
    save_mask,
    save_volume,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_ORIENTATIONS",
    "BinaryMask",
    "ConfigurationError",
    "DimensionalityError",
    "DivergenceError",
    "E2DUNet",
    "GeometryError",
    "NetworkConfig",
    "NiftiFormatError",
    "Orientation",
    "PatchSource",
    "PhantomConfig",
    "ScalarVolume",
    "ShapeError",
    "TrainConfig",
    "TrainingSampler",
    "TransferError",
    "TrisegError",
    "UnsupportedDtypeError",
    "border_pixels_2d",
    "build_network",
    "center_crop",
    "component_sizes",
    "dice_coefficient",
    "dice_loss",
    "e2d_channels",
    "extract_window",
    "fuse",
    "generate_phantom",
    "keep_largest",
    "label_components",
    "load_checkpoint",
    "load_encoder_bank",
    "load_mask",
    "load_volume",
    "lr_at_epoch",
    "minmax_normalize",
    "pad_back",
    "phantom_seed",
    "postprocess",
    "precision_recall",
    "predict_heatmap",
    "random_encoder_bank",
    "save_checkpoint",
    "save_encoder_bank",
    "save_mask",
    "save_volume",
    "segment_volume",
    "split_counts",
    "threshold_heatmap",
    "train_network",
    "transfer_encoder_weights",
    "validate_slices",
]
