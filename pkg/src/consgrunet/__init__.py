"""sEMG hand-gesture recognition toolkit.

A self-contained implementation of a hybrid 1D-CNN + GRU classifier with
learnable gated skip connections: numpy-backed tensor primitives, layer
kernels with exact hand-derived backward passes, windowed data ingestion,
from-scratch Adam training, a reliability-metric suite, deterministic
binary serialization, and a single-window inference latency benchmark.
"""

from . import data, layers, metrics, model, runtime, tensor
from .errors import (
    ConfigError,
    DimensionError,
    DivergenceError,
    FormatError,
    InputError,
    IntegrityError,
    LabelError,
)
from .tensor import Tensor

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DimensionError",
    "DivergenceError",
    "FormatError",
    "InputError",
    "IntegrityError",
    "LabelError",
    "Tensor",
    "data",
    "layers",
    "metrics",
    "model",
    "runtime",
    "tensor",
]
