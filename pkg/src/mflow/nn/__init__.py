"""Deterministic float64 tensor engine with reverse-mode differentiation,
network blocks, and training machinery (AdamW, EMA, cosine schedule)."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .net import (
    TIME_EMBED_DIM,
    Dense,
    EmptyInputError,
    Mlp,
    SetEncoder,
    ShapeMismatchError,
    VectorFieldNet,
    time_embedding,
)
from .optim import AdamW, Ema, NonFiniteGradientError, cosine_warmup_lr
from .tensor import GraphError, Tensor, concat

__all__ = [
    "Tensor",
    "concat",
    "GraphError",
    "Dense",
    "Mlp",
    "VectorFieldNet",
    "SetEncoder",
    "time_embedding",
    "TIME_EMBED_DIM",
    "ShapeMismatchError",
    "EmptyInputError",
    "AdamW",
    "Ema",
    "NonFiniteGradientError",
    "cosine_warmup_lr",
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
]
