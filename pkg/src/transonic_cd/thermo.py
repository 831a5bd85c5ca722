"""Ideal-gas thermodynamics, state classification and background validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class GasModel:
    """Polytropic gas ``p = kappa * rho**gamma * exp(S / c_nu)``."""

    gamma: float = 1.4
    kappa: float = 1.0
    c_nu: float = 1.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise DomainError(f"gamma must exceed 1, got {self.gamma}")
        if not self.kappa > 0.0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if not self.c_nu > 0.0:
            raise DomainError(f"c_nu must be positive, got {self.c_nu}")


@dataclass(frozen=True)
class PrimitiveState:
    u: float
    v: float
    p: float
    rho: float

    def __post_init__(self):
        if not (self.rho > 0.0 and self.p > 0.0):
            raise DomainError(f"state needs rho > 0 and p > 0, got rho={self.rho}, p={self.p}")

    def classify(self, gas: GasModel) -> str:
        """``"subsonic"``, ``"supersonic"`` (u > c) or ``"transonic"`` otherwise."""
        c = sound_speed(self.p, self.rho, gas)
        if self.u * self.u + self.v * self.v < c * c:
            return "subsonic"
        if self.u > c:
            return "supersonic"
        return "transonic"


def _check_positive(p, rho):
    p = np.asarray(p, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if not (np.all(p > 0.0) and np.all(rho > 0.0)):
        raise DomainError("pressure and density must be positive")
    return p, rho


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def sound_speed(p, rho, gas: GasModel):
    """sqrt(gamma p / rho); accepts scalars or arrays."""
    p, rho = _check_positive(p, rho)
    return _out(np.sqrt(gas.gamma * p / rho))


def mach_number(s: PrimitiveState, gas: GasModel) -> float:
    return math.hypot(s.u, s.v) / sound_speed(s.p, s.rho, gas)


def bernoulli(s: PrimitiveState, gas: GasModel) -> float:
    g = gas.gamma
    return 0.5 * (s.u * s.u + s.v * s.v) + g * s.p / ((g - 1.0) * s.rho)


def entropy_multiplier(s: PrimitiveState, gas: GasModel) -> float:
    """A = p / rho**gamma, constant along streamlines of smooth flow."""
    return s.p / s.rho**gas.gamma


def entropy(s: PrimitiveState, gas: GasModel) -> float:
    """S = c_nu log(p / (kappa rho**gamma))."""
    return gas.c_nu * math.log(entropy_multiplier(s, gas) / gas.kappa)


@dataclass(frozen=True)
class BackgroundState:
    """Piecewise-constant layered flow: subsonic on top of supersonic."""

    sub: PrimitiveState
    sup: PrimitiveState
    delta0: float = 0.05
    y_top: float = 1.0
    y_bottom: float = -1.0

    @property
    def m_e(self) -> float:
        return self.sub.rho * self.sub.u * self.y_top

    @property
    def m_h(self) -> float:
        return self.sup.rho * self.sup.u * (-self.y_bottom)


def reference_background() -> BackgroundState:
    p = 1.0 / 1.4
    return BackgroundState(PrimitiveState(0.5, 0.0, p, 1.0), PrimitiveState(2.4, 0.0, p, 0.25))


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    slack: float
    message: str


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def add(self, name, slack, message, passed=None):
        ok = slack > 0.0 if passed is None else passed
        self.checks.append(Check(name, bool(ok), float(slack), message))

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            flag = "ok  " if c.passed else "FAIL"
            lines.append(f"{flag} {c.name}: {c.message} (slack {c.slack:.6g})")
        return "\n".join(lines)


MACH_GATE = "Mach gate M_h > sqrt(1 + L^2/4)"
PRESSURE_MATCH = "background pressure match p_sub = p_sup"


def validate_background(bg: BackgroundState, L: float, gas: GasModel, tol: float = 1e-12) -> ValidationReport:
    """Check positivity, layering, pressure balance, sonic margins and the Mach gate.

    Failures are reported in the returned structure, never raised.
    """
    rep = ValidationReport()
    sub, sup = bg.sub, bg.sup
    rep.add("positivity", min(sub.u, sup.u, sub.rho, sup.rho, sub.p, sup.p),
            "u, rho, p positive in both layers")
    rep.add("parallel flow", tol - max(abs(sub.v), abs(sup.v)), "v = 0 in both layers",
            passed=max(abs(sub.v), abs(sup.v)) <= tol)
    dp = abs(sub.p - sup.p)
    rep.add("pressure match", tol * max(1.0, abs(sub.p)) - dp, f"{PRESSURE_MATCH}, |dp| = {dp:.3g}",
            passed=dp <= tol * max(1.0, abs(sub.p)))
    c_sub = sound_speed(sub.p, sub.rho, gas)
    c_sup = sound_speed(sup.p, sup.rho, gas)
    rep.add("subsonic margin", c_sub - sub.u - bg.delta0, f"c_sub - u_sub > delta0 = {bg.delta0}")
    rep.add("supersonic margin", sup.u - c_sup - bg.delta0, f"u_sup - c_sup > delta0 = {bg.delta0}")
    M = sup.u / c_sup
    gate = math.sqrt(1.0 + 0.25 * L * L)
    rep.add("mach gate", M - gate, f"{MACH_GATE}: {M:.6g} vs {gate:.6g}")
    if M > 1.0:
        rep.add("crossing length", math.sqrt(M * M - 1.0) - 0.5 * L,
                f"sqrt(M_h^2 - 1) = {math.sqrt(M * M - 1.0):.6g} vs L/2 = {0.5 * L:.6g}")
    return rep
