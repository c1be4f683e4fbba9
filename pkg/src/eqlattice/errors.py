"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes:
config / resource problems -> 2, numerical-range problems -> 3,
failed verification checks -> 1.
"""


class EqLatticeError(Exception):
    """Base class for all package errors."""


class ConfigError(EqLatticeError):
    """Invalid scenario configuration or violated model invariant."""


class ResourceLimitError(ConfigError):
    """Requested lattice exceeds the configured path cap."""


class AdmissibilityError(ConfigError):
    """Market price of risk too large for the step size (r*sqrt(h) >= 1)."""


class LatticeError(EqLatticeError):
    """Structural misuse of the lattice (e.g. children of a terminal node)."""


class NumericalRangeError(EqLatticeError):
    """A shifted exponential sum under- or overflowed beyond repair."""


class PreconditionError(EqLatticeError):
    """A verification check was called outside its hypotheses."""


class CheckFailure(EqLatticeError):
    """A verification routine failed to converge or found a violation."""
