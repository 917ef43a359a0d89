"""Unified cluster-prediction dense heads on a minimal reverse-mode tensor engine.

One backbone produces per-pixel embeddings and a set of learned cluster
centers; three output heads compose the shared pixel-to-cluster probability
map with class identities, adaptive depth bins, or unit sphere-segment
centers.  Ships with a deterministic ray-cast scene generator, binary
dataset/checkpoint formats, training/evaluation harnesses, and a CLI.
"""

__version__ = "0.1.0"

from .errors import (ContractError, CorruptionError, FormatError, ShapeError,
                     TrainingDiverged)
from .tensor import Tensor, no_grad

__all__ = [
    "ContractError",
    "CorruptionError",
    "FormatError",
    "ShapeError",
    "Tensor",
    "TrainingDiverged",
    "no_grad",
    "__version__",
]
