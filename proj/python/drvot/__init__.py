"""Voice onset time measurement by structured prediction."""

from ._core import (
    ConfigError,
    DataError,
    IoError,
    Model,
    __version__,
    decode,
    extract,
    loss_augmented_decode,
    structural_hinge,
    task_loss,
    vot_from_segmentation,
)

__all__ = [
    "ConfigError",
    "DataError",
    "IoError",
    "Model",
    "__version__",
    "decode",
    "extract",
    "loss_augmented_decode",
    "structural_hinge",
    "task_loss",
    "vot_from_segmentation",
]
