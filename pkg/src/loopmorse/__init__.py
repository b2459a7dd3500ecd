"""Morse theory of broken-geodesic path spaces attached to quasi-Hamiltonian SU(N)-spaces."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConjugateSegmentError,
    CutLocusError,
    DegenerateInput,
    LoopMorseError,
    MissingCohomologyError,
    PreconditionError,
)
from .lie import GroupSpec, group_from_name, su

__all__ = [
    "ConfigError",
    "ConjugateSegmentError",
    "CutLocusError",
    "DegenerateInput",
    "GroupSpec",
    "LoopMorseError",
    "MissingCohomologyError",
    "PreconditionError",
    "group_from_name",
    "su",
]
