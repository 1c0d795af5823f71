"""Exception types shared across the package."""


class CwpottsError(Exception):
    """Base class for all package-specific errors."""


class DomainError(CwpottsError):
    """Argument outside the mathematical domain of a function."""


class BoundaryPoint(CwpottsError):
    """Derivative requested at a boundary point of the simplex."""


class UnsupportedRegime(CwpottsError):
    """(q, beta) outside the supported low-temperature regimes."""


class DegenerateTemperature(CwpottsError):
    """beta coincides with a spinodal temperature within tolerance."""


class EigenStructureError(CwpottsError):
    """Saddle-product matrix does not have exactly one negative eigenvalue."""


class DefinitenessError(CwpottsError):
    """Hessian determinant has the wrong sign for the requested prefactor."""


class CapacityError(CwpottsError):
    """State count exceeds the configured maximum."""


class SpectrumUnavailable(CwpottsError):
    """Eigen-decomposition is unavailable or failed to converge."""


class EmptyValley(CwpottsError):
    """A required metastable valley contains no grid point."""


class PathStuck(CwpottsError):
    """Descending-path construction found no admissible step."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class SolveFailure(CwpottsError):
    """Linear solve did not reach the residual target."""


class InvalidTestFunction(CwpottsError):
    """Dirichlet test function violates its boundary conditions."""


class NotAPath(CwpottsError):
    """State sequence is not a path of positive-rate edges."""
