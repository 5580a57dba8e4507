"""Exception types shared across the package."""


class CmcChainError(Exception):
    """Base class for all package errors."""


class DomainError(CmcChainError):
    """Evaluation outside the domain of a profile or block."""


class ProfileError(CmcChainError):
    """A metric profile violates a structural invariant."""


class SingularPointError(CmcChainError):
    """Surface quantity requested at an axis point where it is undefined."""


class PerturbationTooLargeError(CmcChainError):
    """Normal deformation violates the smallness precondition."""


class RangeError(CmcChainError):
    """Argument outside the admissible range of an expansion or map."""


class NoSolutionError(CmcChainError):
    """Root finding or inversion has no solution in the admissible range."""


class InvalidCutError(CmcChainError):
    """Flux cut does not intersect the curve in a single latitude circle."""


class CalibrationError(CmcChainError):
    """Calibrated constants fail their structural fit; signals a bug."""


class InfeasibleError(CmcChainError):
    """The leading-order balancing system has no positive solution."""


class NonConvergenceError(CmcChainError):
    """Iterative solver failed to converge."""


class ConfigError(CmcChainError):
    """Invalid run configuration."""
