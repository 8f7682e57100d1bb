"""Simulation of sparse Lindbladians through sparse Stinespring isometries."""
from .errors import InvariantError, ValidationError
from .lindblad import (
    ChoiDistance,
    LindbladModel,
    OvercompleteGKS,
    QuantumChannel,
    Superoperator,
    choi_distance,
    exact_channel,
    gks_from_lindblad_ops,
    lindblad_ops_from_gks,
    liouvillian,
    one_to_one_norm_witness,
)

__version__ = "0.1.0"

__all__ = [
    "ChoiDistance",
    "InvariantError",
    "LindbladModel",
    "OvercompleteGKS",
    "QuantumChannel",
    "Superoperator",
    "ValidationError",
    "choi_distance",
    "exact_channel",
    "gks_from_lindblad_ops",
    "lindblad_ops_from_gks",
    "liouvillian",
    "one_to_one_norm_witness",
]
