"""Exception types raised across the package."""


class InputError(ValueError):
    """An argument violates a documented precondition."""


class NecessityError(InputError):
    """k is below the bound max(p+2, q+1) needed for the curvature inequalities."""


class SingularStateError(InputError):
    """A warping function vanishes where a regular state is required."""


class NumericalInconsistencyError(ArithmeticError):
    """A quantity that must be non-negative came out clearly negative."""


class RouteDisagreementError(AssertionError):
    """The inequality route and the eigenvalue-profile route gave different answers."""


class StepSizeError(ArithmeticError):
    """ODE residuals exceed the step-size error model; refine the step."""


class SmoothingError(RuntimeError):
    """No mollifier width in the allowed range produced a valid certificate."""


class ConstructionError(RuntimeError):
    """The warped metric could not be assembled."""


class InfeasibleError(ConstructionError):
    """rho/N is not below kappa, so the neck cannot be built."""

    def __init__(self, message, kappa=None, rho_over_n=None):
        super().__init__(message)
        self.kappa = kappa
        self.rho_over_n = rho_over_n


class NonConvergenceError(ConstructionError):
    """A parameter search exhausted its iteration budget."""

    def __init__(self, message, binding=None):
        super().__init__(message)
        self.binding = binding
