"""Synthetic outlier-detection datasets, curriculum sampling and evaluation tools."""

from .core import (
    ConfigError,
    DataError,
    GenerationStalled,
    LabeledDataset,
    PaddingPolicy,
    SeedPath,
    pad_and_rescale,
    read_dataset,
    write_dataset,
)

__version__ = "0.1.0"
