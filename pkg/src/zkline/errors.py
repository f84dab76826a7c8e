"""Exception hierarchy shared across the package.

``ConfigError`` signals bad user input (CLI exit code 2); everything derived
from ``NumericsError`` signals a failure of the computation itself (exit 3).
"""


class ZkError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ZkError):
    """Invalid configuration file, key, or value."""


class NumericsError(ZkError):
    """A numerical procedure failed or produced inconsistent results."""


class GridMismatchError(NumericsError):
    """Operands live on incompatible grids."""


class DomainError(NumericsError):
    """Domain cannot hold the requested profile (tail too large, c <= 0, ...)."""


class ResonantSpeedError(NumericsError):
    """sqrt(5c)*L/2 is an integer: a transverse mode sits exactly at the edge."""


class EigensolveError(NumericsError):
    """Eigenvalue extraction failed or was ambiguous."""


class ModulationError(NumericsError):
    """Newton iteration for the modulation parameters did not converge."""


class OutsideTubeError(NumericsError):
    """State is too far from the solitary-wave tube for the requested operation."""


class BlowupError(NumericsError):
    """Solution amplitude exceeded the configured cap during time stepping."""


class BracketError(NumericsError):
    """Shooting could not bracket a sign change for a coefficient."""
