class FinslerTwistError(Exception):
    """Base class for errors raised by this package."""


class NumericalError(FinslerTwistError):
    """An integrator or solver missed its tolerance.

    ``residual`` is the achieved error estimate, ``context`` names the
    operation and point where it happened.
    """

    def __init__(self, message, residual=float("nan"), context=None):
        super().__init__(message)
        self.residual = residual
        self.context = dict(context or {})

    def __str__(self):
        base = super().__str__()
        extra = f" (residual={self.residual:.3e}"
        if self.context:
            extra += ", " + ", ".join(f"{k}={v}" for k, v in self.context.items())
        return base + extra + ")"


class DomainError(FinslerTwistError, ValueError):
    """Input outside the domain of an operation (zero vector, v1 <= 0, ...)."""


class InadmissibleProfileError(FinslerTwistError, ValueError):
    """Constants (D, A, B, D_pm) admit no convex profile; names the violated inequality."""


class SpecError(FinslerTwistError, ValueError):
    """An invalid parameter set, e.g. a Hamiltonian that is not convex enough."""


class ConfigError(FinslerTwistError, ValueError):
    """Invalid experiment configuration."""
