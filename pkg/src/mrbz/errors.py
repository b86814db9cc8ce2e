"""Exception hierarchy for the reconstruction toolkit."""


class MrbzError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgument(MrbzError, ValueError):
    """A parameter violates a documented precondition."""


class MeshFormatError(MrbzError):
    """A mesh/field/data file does not follow the documented format."""


class ElectrodeEmpty(MrbzError):
    """An electrode tag matched no boundary edge, so the Dirichlet data is lost."""


class NonCoercive(MrbzError):
    """A conductivity field is not strictly positive."""


class SingularSystem(MrbzError):
    """The linear system is singular (e.g. a pure-Neumann stiffness matrix)."""


class NoConvergence(MrbzError):
    """An iterative solve did not reach its tolerance within the iteration cap."""

    def __init__(self, message: str, achieved_residual: float | None = None):
        super().__init__(message)
        self.achieved_residual = achieved_residual


class SingularCoefficientMatrix(MrbzError):
    """The per-triangle 2x2 gradient matrix is numerically singular inside
    the inner region, i.e. the invertibility assumption fails."""

    def __init__(self, triangle: int, det: float):
        super().__init__(
            f"coefficient matrix singular on triangle {triangle} (det={det:.3e})"
        )
        self.triangle = triangle
        self.det = det


class TraceMismatch(MrbzError):
    """A snapshot does not satisfy the Dirichlet data of its drive."""


class IllConditionedReducedSystem(MrbzError):
    """The dense reduced system is too ill-conditioned to solve reliably."""

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition
