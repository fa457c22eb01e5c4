"""Exception hierarchy shared by all hamiltonia modules."""


class HamiltoniaError(Exception):
    """Base class for library errors."""


class DiophantineViolation(HamiltoniaError):
    """Attached Diophantine constants contradicted by a divisor."""


class TruncationExceeded(HamiltoniaError):
    """An operation would produce harmonics beyond the declared degree."""


class OrderTooLarge(HamiltoniaError):
    """Requested order exceeds the configured enumeration budget."""


class BudgetExceeded(HamiltoniaError):
    """A combinatorial computation exceeds its budget."""


class ZeroCurrentLine(HamiltoniaError):
    """A tree line carries zero current where a divisor is required."""


class PreconditionViolated(HamiltoniaError):
    """Input does not satisfy a documented precondition."""


class NoConvergence(HamiltoniaError):
    """An iterative solver failed to converge."""


class DomainViolation(HamiltoniaError):
    """Arguments fall outside the domain of a formula."""


class TurningPointDegenerate(HamiltoniaError):
    """A turning point has vanishing force (separatrix energy)."""


class NotPositiveDefinite(HamiltoniaError):
    """A matrix expected to be positive definite is not."""


class CollisionDetected(HamiltoniaError):
    """Two lattice particles came too close."""


class TailNotDecaying(HamiltoniaError):
    """An improper integrand does not decay on the truncated range."""


class JacobianSingular(HamiltoniaError):
    """A Jacobian matrix is numerically singular."""


class ImplicitSolveFailed(HamiltoniaError):
    """Newton solve for an implicitly defined map failed."""


class ChartSingular(HamiltoniaError):
    """Point lies at a coordinate-chart singularity."""


class ForbiddenRegion(HamiltoniaError):
    """Radicand of a quadrature is negative."""


class FitIllConditioned(HamiltoniaError):
    """Least-squares fit has an ill-conditioned design matrix."""


class ZeroMeanObstruction(HamiltoniaError):
    """Nonvanishing average in an order-by-order solve."""


class ResonantDenominator(HamiltoniaError):
    """A divisor vanishes for a harmonic that is needed."""


class DegenerateHessian(HamiltoniaError):
    """Hessian of the averaged potential is singular."""


class StationarityViolated(HamiltoniaError):
    """The base point is not stationary for the averaged potential."""


class ResummationDiverges(HamiltoniaError):
    """Geometric dominance fails for a resummed propagator."""


class NotClosed(HamiltoniaError):
    """A one-form expected to be closed fails the curl test."""
