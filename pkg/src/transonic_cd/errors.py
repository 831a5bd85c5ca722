"""Exception hierarchy shared by all solver layers."""


class TransonicError(Exception):
    """Base class for every error raised by the package."""


class DomainError(TransonicError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class SonicDegeneracyError(TransonicError):
    """No subsonic density root exists for the given stream gradient."""

    def __init__(self, chi, chi_crit, where=None):
        self.chi = chi
        self.chi_crit = chi_crit
        self.where = where
        msg = f"no subsonic density root: chi={chi!r} >= chi_crit={chi_crit!r}"
        if where is not None:
            msg += f" at {where}"
        super().__init__(msg)


class SonicLimitError(TransonicError):
    """Pressure or Riemann target outside the supersonic admissible range."""


class AdmissibilityError(TransonicError):
    """Velocity recovery would need the root of a negative number."""


class DegenerateFlowError(TransonicError):
    """Mass flux density rho*u is not positive somewhere."""


class EllipticityError(TransonicError):
    """Linearized coefficients lost ellipticity (iterate out of range)."""


class SingularOperatorError(TransonicError):
    """Factorization of the discrete elliptic operator failed."""


class DataError(TransonicError, ValueError):
    """Boundary or inlet data are mutually inconsistent."""


class CFLError(TransonicError):
    """Marching step violates the characteristic stability bound."""


class NonPhysicalAngleError(TransonicError):
    """Flow angle too close to vertical for tan() to be meaningful."""


class DivergenceError(TransonicError):
    """A fixed-point loop did not converge; carries the residual history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history if history is not None else {}


class ConfigError(TransonicError, ValueError):
    """Configuration problem, optionally tied to a line and a named condition."""

    def __init__(self, message, line=None, condition=None):
        self.line = line
        self.condition = condition
        prefix = f"line {line}: " if line is not None else ""
        suffix = f" [{condition}]" if condition else ""
        super().__init__(prefix + message + suffix)
