"""Exception types shared across the toolkit."""


class AnnealkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(AnnealkitError, ValueError):
    """An argument violates a documented precondition."""


class ParseError(AnnealkitError, ValueError):
    """Malformed input text. Carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SizeGuardError(AnnealkitError, ValueError):
    """Problem size exceeds a configured safety guard."""


class IntegrationError(AnnealkitError, RuntimeError):
    """An ODE integration failed. Carries the time of failure."""

    def __init__(self, message, t=None):
        self.t = t
        if t is not None:
            message = f"{message} (at t={t:g})"
        super().__init__(message)


class ShootingError(AnnealkitError, RuntimeError):
    """Boundary-value shooting failed to converge.

    ``last_gamma0`` and ``last_schedule`` hold the strongest force amplitude
    that did converge during continuation, if any.
    """

    def __init__(self, message, last_gamma0=None, last_schedule=None):
        self.last_gamma0 = last_gamma0
        self.last_schedule = last_schedule
        if last_gamma0 is not None:
            message = f"{message} (last converged amplitude: {last_gamma0:g})"
        super().__init__(message)


class DegenerateSpectrumError(AnnealkitError, ValueError):
    """Operation requires a non-degenerate spectrum but the gap vanished."""
