"""Exception and warning types shared by all modules."""


class ConfigurationError(ValueError):
    """Invalid parameters, grids or input files (CLI exit code 2)."""


class HorizonError(ConfigurationError):
    """Requested times exceed the periodic-box wraparound horizon."""

    def __init__(self, message, horizon):
        super().__init__(f"{message} (horizon = {horizon:.6g})")
        self.horizon = horizon


class NumericalError(RuntimeError):
    """A computation failed numerically (CLI exit code 3)."""


class BlowUpError(NumericalError):
    def __init__(self, t):
        super().__init__(f"non-finite state detected at t = {t:.6g}")
        self.t = t


class ConvergenceError(NumericalError):
    """Iteration stopped without reaching its tolerance.

    ``reason`` is ``"stagnation"`` when the residual stopped decreasing above the
    tolerance (typically a quadrature grid that is too coarse) and ``"max_iter"``
    when the iteration budget ran out while still contracting.
    """

    def __init__(self, message, residuals, reason):
        super().__init__(f"{message} [{reason}]")
        self.residuals = list(residuals)
        self.reason = reason


class InequalityViolation(AssertionError):
    """A numerically checked inequality with an explicit constant failed."""


class NLSWarning(UserWarning):
    """Advisory conditions (sigma regime, confinement leak, horizon, aliasing)."""
