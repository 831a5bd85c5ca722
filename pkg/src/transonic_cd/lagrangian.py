"""Mass-coordinate transform: inlet mass flux, eta(y), inverse map and contact line."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DegenerateFlowError, DomainError
from .profiles import Profile


@dataclass(frozen=True)
class NozzleGeometry:
    """Walls ``g-(x) = y_bottom + eps*lower(x/L)`` and ``g+(x) = y_top + eps*upper(x/L)``.

    Shapes come from profile families with analytic derivatives (or PCHIP
    derivatives for tables), so slopes and curvatures are available exactly.
    """

    L: float = 1.0
    y_bottom: float = -1.0
    y_top: float = 1.0
    lower: Profile = field(default_factory=Profile)
    upper: Profile = field(default_factory=Profile)
    eps: float = 0.0

    def __post_init__(self):
        if not self.L > 0.0:
            raise DomainError(f"nozzle length must be positive, got {self.L}")
        if not self.y_bottom < 0.0 < self.y_top:
            raise DomainError("need y_bottom < 0 < y_top")
        x = np.linspace(0.0, self.L, 1025)
        if not np.all(self.g_minus(x) < self.g_plus(x)):
            raise DomainError("walls cross: g- must stay below g+")

    def _wall(self, base, prof, x, order):
        x = np.asarray(x, dtype=float)
        val = self.eps * prof(x / self.L, order) / self.L**order
        if order == 0:
            val = val + base
        return float(val) if val.ndim == 0 else val

    def g_minus(self, x, order: int = 0):
        """Lower wall height (order 0), slope (1) or curvature (2)."""
        return self._wall(self.y_bottom, self.lower, x, order)

    def g_plus(self, x, order: int = 0):
        return self._wall(self.y_top, self.upper, x, order)

    def sample(self, nx: int) -> dict:
        x = np.linspace(0.0, self.L, nx)
        return {"x": x, "g_minus": self.g_minus(x), "g_plus": self.g_plus(x),
                "dg_minus": self.g_minus(x, 1), "dg_plus": self.g_plus(x, 1)}


@dataclass(frozen=True)
class LagrangianDomain:
    """Rectangles [0, L] x [0, m_e] (subsonic) and [0, L] x [-m_h, 0] (supersonic)."""

    L: float
    m_e: float
    m_h: float
    nx: int
    ny_sub: int
    ny_sup: int

    def __post_init__(self):
        if not (self.m_e > 0.0 and self.m_h > 0.0):
            raise DomainError("mass fluxes must be positive")
        if min(self.nx, self.ny_sub, self.ny_sup) < 3:
            raise DomainError("each grid axis needs at least 3 nodes")

    @property
    def xi(self):
        return np.linspace(0.0, self.L, self.nx)

    @property
    def eta_hat_sub(self):
        return np.linspace(0.0, 1.0, self.ny_sub)

    @property
    def eta_hat_sup(self):
        return np.linspace(0.0, 1.0, self.ny_sup)

    @property
    def eta_sub(self):
        return self.m_e * self.eta_hat_sub

    @property
    def eta_sup(self):
        return self.m_h * (self.eta_hat_sup - 1.0)

    @property
    def dxi(self):
        return self.L / (self.nx - 1)

    @property
    def deta_sub(self):
        return self.m_e / (self.ny_sub - 1)

    @property
    def deta_sup(self):
        return self.m_h / (self.ny_sup - 1)

    def with_m_e(self, m_e: float) -> "LagrangianDomain":
        """Same normalized grids with a rescaled subsonic strip."""
        return replace(self, m_e=float(m_e))


@dataclass
class InletData:
    """Inlet and exit data in mass coordinates.

    Subsonic data are callables of eta (defined for any eta >= 0, since m_e
    is free). Supersonic data are sampled on the fixed supersonic eta-grid,
    with ``y_sup`` the physical abscissa of each node.
    """

    p0: Callable
    B0: Callable
    A0: Callable
    exit_angle: Callable
    m_h: float
    eta_sup: np.ndarray
    y_sup: np.ndarray
    z_minus: np.ndarray
    z_plus: np.ndarray
    B_sup: np.ndarray
    A_sup: np.ndarray
    p_sup: np.ndarray
    omega_sup: np.ndarray


def inlet_mass_flux(y, rho_u) -> float:
    """Trapezoid integral of rho*u over the supersonic inlet samples."""
    y = np.asarray(y, dtype=float)
    rho_u = np.asarray(rho_u, dtype=float)
    if np.any(~(rho_u > 0.0)):
        raise DomainError("rho*u must be positive at every inlet sample")
    return float(np.trapezoid(rho_u, y))


def eta_of_y(x, y, y_samples, rho_u_samples, m_h, geom: NozzleGeometry):
    """Mass coordinate of ordinate y at section x from a sampled rho*u column.

    ``y_samples`` must start at g-(x); the integrand is taken piecewise linear
    between samples and constant beyond the last one.
    """
    ys = np.asarray(y_samples, dtype=float)
    f = np.asarray(rho_u_samples, dtype=float)
    if np.any(~(f > 0.0)):
        raise DomainError("rho*u must be positive")
    lo, hi = geom.g_minus(x), geom.g_plus(x)
    if abs(ys[0] - lo) > 1e-12 * max(1.0, abs(lo)):
        raise DomainError("y samples must start on the lower wall")
    y = np.asarray(y, dtype=float)
    tol = 1e-12 * max(1.0, abs(hi - lo))
    if np.any(y < lo - tol) or np.any(y > hi + tol):
        raise DomainError(f"y outside the nozzle section [{lo}, {hi}] at x={x}")
    cum = np.concatenate(([0.0], cumulative_trapezoid(f, ys)))
    j = np.clip(np.searchsorted(ys, y, side="right") - 1, 0, len(ys) - 2)
    t = y - ys[j]
    w = np.clip(t / (ys[j + 1] - ys[j]), None, 1.0)
    fy = f[j] + w * (f[j + 1] - f[j])
    beyond = np.maximum(y - ys[-1], 0.0)
    t = np.minimum(t, ys[j + 1] - ys[j])
    out = cum[j] + 0.5 * t * (f[j] + fy) + beyond * f[-1] - m_h
    return float(out) if out.ndim == 0 else out


def inverse_map(rho_u_sup, rho_u_sub, eta_sup, eta_sub, geom: NozzleGeometry, xi):
    """Physical ordinates of every Lagrangian node.

    Returns ``(y_sup, y_sub, top_defect)`` where ``top_defect`` is
    ``y(xi, m_e) - g+(xi)`` per section.
    """
    rho_u_sup = np.asarray(rho_u_sup, dtype=float)
    rho_u_sub = np.asarray(rho_u_sub, dtype=float)
    for name, arr in (("supersonic", rho_u_sup), ("subsonic", rho_u_sub)):
        bad = ~(arr > 0.0)
        if bad.any():
            i, k = np.argwhere(bad)[0]
            raise DegenerateFlowError(f"non-positive rho*u in the {name} region at node ({i}, {k})")
    y0 = geom.g_minus(np.asarray(xi))[:, None]
    y_sup = y0 + cumulative_trapezoid(1.0 / rho_u_sup, eta_sup, axis=1, initial=0.0)
    y_sub = y_sup[:, -1:] + cumulative_trapezoid(1.0 / rho_u_sub, eta_sub, axis=1, initial=0.0)
    top_defect = y_sub[:, -1] - geom.g_plus(np.asarray(xi))
    return y_sup, y_sub, top_defect


def reconstruct_contact(y_sup, slope_trace):
    """Contact height ``g_cd`` (top row of the supersonic ordinates) and its slope v/u."""
    return np.array(y_sup[:, -1], dtype=float), np.array(slope_trace, dtype=float)
