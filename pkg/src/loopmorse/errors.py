"""Exception types raised by loopmorse."""


class LoopMorseError(Exception):
    """Base class for all library errors."""


class CutLocusError(LoopMorseError):
    """The minimal geodesic between two group elements is not unique."""


class ConjugateSegmentError(LoopMorseError):
    """A Jacobi boundary-value problem is singular on the requested segment."""


class PreconditionError(LoopMorseError):
    """An operation was called outside its domain."""


class DegenerateInput(LoopMorseError):
    """Input is degenerate (e.g. a zero generator) where a nonzero one is needed."""


class MissingCohomologyError(LoopMorseError):
    """A critical component has no Poincare series available."""


class ConfigError(LoopMorseError):
    """Invalid run configuration."""
