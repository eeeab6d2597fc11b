"""Exception hierarchy shared by all modules."""


class XCoherenceError(Exception):
    """Base class for every error raised by the package."""


class ModelError(XCoherenceError, ValueError):
    """Physical parameters or supplied matrices are inconsistent."""


class NonDiagonalizableError(XCoherenceError, ArithmeticError):
    """The drift matrix is defective or too close to defective."""


class UnstableSystemError(XCoherenceError, ArithmeticError):
    """Some eigenvalue of the drift has non-positive real part; no stationary state."""


class ZeroIntensityError(XCoherenceError, ArithmeticError):
    """A projected steady detector intensity vanishes, so g2 is undefined."""


class StepTooCoarseError(XCoherenceError, ValueError):
    pass


class StepGuardError(XCoherenceError, ValueError):
    """Integrator step or burn-in violates the stability/steady-state guards."""


class TauOffGridError(XCoherenceError, ValueError):
    """Requested delay is not an integer multiple of the sampling interval."""


class ConfigSyntaxError(XCoherenceError):
    """Configuration text could not be tokenized."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ConfigValidationError(XCoherenceError, ValueError):
    """Configuration parsed but violates an invariant."""
