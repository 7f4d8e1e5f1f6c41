"""Exception hierarchy shared across the package."""


class ParameterError(ValueError):
    """A caller-supplied parameter is out of its admissible range."""


class DomainError(ValueError):
    """A function was queried outside its mathematical domain."""


class CflViolation(ParameterError):
    """The requested time step exceeds the monotonicity-preserving bound."""

    def __init__(self, dt: float, dt_max: float):
        super().__init__(f"dt={dt:.6g} exceeds the CFL bound dt_max={dt_max:.6g}")
        self.dt = dt
        self.dt_max = dt_max


class InvariantViolation(RuntimeError):
    """A structural invariant of a scheme broke at runtime.

    Carries whatever partial result was computed before the failure so the
    caller can inspect it.
    """

    def __init__(self, message: str, partial=None, step: int | None = None):
        super().__init__(message)
        self.partial = partial
        self.step = step


class ControlBoxError(RuntimeError):
    """An optimal control landed on the boundary of the search box."""
