"""Exception types shared across the package."""


class HcfemError(Exception):
    """Base class for all package-specific errors."""


class NotPositiveDefinite(HcfemError):
    """A factorization pivot fell at or below the positivity floor.

    Usually means a coercivity assumption was violated upstream.
    """


class BreakdownNonSPD(HcfemError):
    """CG detected a non-positive curvature direction (p'Ap <= 0)."""


class NoConvergence(HcfemError):
    """An iterative eigenvalue estimate hit its step cap. Caller may densify."""


class InvalidDimensions(HcfemError):
    """Dimension arguments are out of range for the requested construction."""


class DimensionMismatch(HcfemError):
    """Operands have incompatible shapes."""


class AssumptionsViolated(HcfemError):
    """A form pair failed its structural assumption check."""


class FunctionalNotInKernel(HcfemError):
    """Right-hand side of a constrained solve is not orthogonal to the subspace."""


class SolverFailure(HcfemError):
    """A linear solve did not reach its residual target."""


class MisalignedGeometry(HcfemError):
    """Subdomain boundaries do not coincide with mesh lines."""


class NonPositiveCoefficient(HcfemError):
    """A diffusivity value is zero or negative where positivity is required."""


class AssumptionCheckFailed(HcfemError):
    """An assembled form pair does not satisfy the structural assumptions."""


class CoefficientBelowFloor(HcfemError):
    """A coefficient field dropped below its positive lower bound."""


class ConfigInvalid(HcfemError):
    """An experiment configuration failed validation."""


class ExperimentFailed(HcfemError):
    """An experiment could not be completed."""


class ExpressionError(HcfemError):
    """A coefficient/load expression could not be parsed."""
