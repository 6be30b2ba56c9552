"""Exception types shared across the package."""


class SeqcombineError(Exception):
    """Base class for all package-specific errors."""


class NotPositiveDefinite(SeqcombineError):
    """A matrix required to be positive definite is not (to tolerance)."""


class DimensionMismatch(SeqcombineError):
    """Vector/matrix dimensions do not agree."""


class DegenerateDirection(SeqcombineError):
    """The targeting direction carries no variance (e.g. all-zero mean estimates)."""


class TrivialCombination(SeqcombineError):
    """A sequential combination omits the current look's statistic."""


class LookOrder(SeqcombineError):
    """Analysis times passed out of order (requires s <= t)."""


class InvalidSpec(SeqcombineError):
    """A scenario specification fails validation."""


class ArmMissing(SeqcombineError):
    """An operation needs both arms but one has no subjects."""


class DegenerateArm(SeqcombineError):
    """Arm-combination weights undefined (randomization fraction not in (0, 1))."""


class RestrictionExceedsFollowup(SeqcombineError):
    """A restriction time exceeds the analysis time it is evaluated at."""


class NonMonotoneInformation(SeqcombineError):
    """Variance sequence for a boundary recursion is not strictly increasing."""


class InsufficientData(SeqcombineError):
    """Not enough (or degenerate) replicates for an empirical summary."""


class ConfigInvalid(SeqcombineError):
    """A run configuration fails validation; message names the offending field."""


class SchemaError(SeqcombineError):
    """An input data file does not match the expected schema."""


class StateMismatch(SeqcombineError):
    """A persisted analysis state disagrees with the data now supplied."""
