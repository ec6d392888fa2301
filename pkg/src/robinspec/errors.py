"""Exception types shared across the package."""


class RobinspecError(Exception):
    """Base class for all package-specific errors."""


class HermitianDefectError(RobinspecError):
    """Input matrix is too far from Hermitian to be symmetrized."""


class DomainError(RobinspecError, ValueError):
    """Argument outside the mathematical domain of a function."""


class UnboundedSupportError(RobinspecError):
    """Potential profile has no numerically detectable decay."""


class SingularEndpointError(RobinspecError):
    """The fundamental solution is numerically singular at the matching point.

    Carries the offending spectral parameter so the caller can perturb it.
    """

    def __init__(self, lam, cond):
        super().__init__(f"fundamental matrix singular at lambda={lam:.17g} (cond~{cond:.3g})")
        self.lam = lam
        self.cond = cond


class PoleError(RobinspecError):
    """A Riccati trajectory blew up (matrix norm beyond the pole threshold)."""

    def __init__(self, x, norm):
        super().__init__(f"Riccati pole near x={x:.6g} (|F| ~ {norm:.3g})")
        self.x = x
        self.norm = norm


class TransformRefusedError(RobinspecError):
    """Ground-state trace too inaccurate to support the commutation transform."""


class GridCapError(RobinspecError):
    """Requested discretization exceeds the desk-scale caps."""


class ProblemFileError(RobinspecError):
    """Malformed problem file; message names the offending key."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
