"""Supersonic region: Riemann invariants, characteristic speeds, upwind march."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import RegularGridInterpolator

from . import kernels
from .errors import AdmissibilityError, CFLError, NonPhysicalAngleError, SonicLimitError
from .thermo import GasModel

CFL_SAFETY = 0.8


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class ThetaClosure:
    """Pressure potential Theta(p; B, A), zero at ``p_ref`` and increasing in p.

    Theta is evaluated in closed form through the Prandtl-Meyer function,
    ``Theta(p) = nu(M(p_ref)) - nu(M(p))``, which is the antiderivative of
    ``sqrt(q^2 - c^2) / (rho c q^2)`` along an isentrope at fixed B.
    """

    gas: GasModel
    p_ref: float
    tol: float = 1e-12

    def admissible(self, p, B, A):
        p = np.asarray(p, dtype=float)
        return (p > 0.0) & (p < kernels.sonic_pressure(B, A, self.gas.gamma))

    def _check(self, p, B, A):
        if not np.all(self.admissible(p, B, A)):
            raise SonicLimitError("pressure outside the supersonic admissible interval")
        if not np.all(self.admissible(self.p_ref, B, A)):
            raise SonicLimitError("reference pressure is not supersonic for this (B, A)")

    def value(self, p, B, A):
        self._check(p, B, A)
        return _out(kernels.theta_closed(np.asarray(p, dtype=float), B, A, self.gas.gamma, self.p_ref))

    def slope(self, p, B, A):
        self._check(p, B, A)
        return _out(kernels.theta_slope(np.asarray(p, dtype=float), B, A, self.gas.gamma))

    def range(self, B, A):
        return kernels.theta_range(B, A, self.gas.gamma, self.p_ref)

    def inverse(self, target, B, A, guess=None):
        p = kernels.theta_inverse(target, B, A, self.gas.gamma, self.p_ref, guess)
        if np.any(np.isnan(p)):
            raise SonicLimitError("Riemann target outside the range of Theta")
        return _out(p)


def theta(p, B, A, gas: GasModel, closure: ThetaClosure) -> float:
    """Theta by adaptive quadrature of its integrand from ``closure.p_ref`` to p."""
    if not closure.admissible(p, B, A):
        raise SonicLimitError(f"p = {p} outside the supersonic admissible interval")
    if p == closure.p_ref:
        return 0.0
    val, _ = quad(lambda s: float(kernels.theta_slope(s, B, A, gas.gamma)), closure.p_ref, p,
                  epsabs=closure.tol, epsrel=closure.tol, limit=200)
    return val


def riemann_from_state(omega, p, B, A, gas: GasModel, closure: ThetaClosure):
    th = closure.value(p, B, A)
    ang = np.arctan(omega)
    return _out(ang + th), _out(ang - th)


def state_from_riemann(z_minus, z_plus, B, A, gas: GasModel, closure: ThetaClosure, guess=None):
    """Invert the invariants: ``omega = tan((z- + z+)/2)``, ``Theta(p) = (z- - z+)/2``."""
    zm = np.asarray(z_minus, dtype=float)
    zp = np.asarray(z_plus, dtype=float)
    half = 0.5 * (zm + zp)
    if np.any(np.abs(half) >= 0.5 * np.pi - 1e-6):
        raise NonPhysicalAngleError("flow angle at or beyond vertical")
    p = closure.inverse(0.5 * (zm - zp), B, A, guess)
    return _out(np.tan(half)), p


def velocities_from(omega, p, B, A, gas: GasModel):
    g = gas.gamma
    omega = np.asarray(omega, dtype=float)
    rad = 2.0 * ((g - 1.0) * np.asarray(B) - g * (A * np.asarray(p) ** (g - 1.0)) ** (1.0 / g)) / (
        (g - 1.0) * (1.0 + omega * omega))
    if np.any(~(rad > 0.0)):
        raise AdmissibilityError("velocity radicand is not positive (stagnation limit)")
    u = np.sqrt(rad)
    return _out(u), _out(omega * u)


def supersonic_primitives(omega, p, B, A, gas: GasModel):
    u, v = velocities_from(omega, p, B, A, gas)
    rho = (np.asarray(p) / A) ** (1.0 / gas.gamma)
    return u, v, p, _out(rho)


def char_speeds(z_minus, z_plus, B, A, gas: GasModel, closure: ThetaClosure):
    """``(lambda-, lambda+)`` of the eta-slopes of the two characteristic families."""
    omega, p = state_from_riemann(z_minus, z_plus, B, A, gas, closure)
    u, v = velocities_from(omega, p, B, A, gas)
    g = gas.gamma
    rho = (np.asarray(p) / A) ** (1.0 / g)
    c2 = g * np.asarray(p) / rho
    q2 = np.asarray(u) ** 2 + np.asarray(v) ** 2
    if np.any(~(q2 > c2)):
        raise SonicLimitError("state is not supersonic")
    fac = rho * u * c2 / (np.asarray(u) ** 2 - c2)
    r = np.sqrt(q2 - c2) / np.sqrt(c2)
    return _out(fac * (omega - r)), _out(fac * (omega + r))


@dataclass
class RiemannField:
    xi: np.ndarray
    eta: np.ndarray
    z_minus: np.ndarray
    z_plus: np.ndarray
    lam_minus: np.ndarray
    lam_plus: np.ndarray
    p: np.ndarray
    nsub: int
    courant: float

    @property
    def omega(self):
        return np.tan(0.5 * (self.z_minus + self.z_plus))

    @property
    def omega_contact(self):
        return self.omega[:, -1]


def substeps_needed(lam_abs_max, dxi, deta, safety=CFL_SAFETY):
    return max(1, int(math.ceil(lam_abs_max * dxi / (safety * deta) - 1e-12)))


def march_supersonic(z0_minus, z0_plus, wall_slope, contact_pressure, B, A, xi, eta,
                     gas: GasModel, closure: ThetaClosure, nsub=None, adaptive=True) -> RiemannField:
    """First-order upwind march of the invariants from the inlet to x = L.

    ``wall_slope`` is a callable g-'(x) or an array on the xi-grid (linearly
    interpolated between levels), ``contact_pressure`` an array on the xi-grid.
    ``B`` and ``A`` are per-streamline arrays on the eta-grid.

    Each xi-interval is split into ``nsub`` equal substeps; by default
    ``nsub`` follows from the inlet speeds and the CFL safety factor. With
    ``adaptive`` set, a march whose Courant number exceeds 1 is repeated with
    enough substeps for the observed speeds; otherwise it raises ``CFLError``.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    nx = xi.size
    dxi = xi[1] - xi[0]
    deta = eta[1] - eta[0]
    B = np.broadcast_to(np.asarray(B, dtype=float), eta.shape)
    A = np.broadcast_to(np.asarray(A, dtype=float), eta.shape)
    if nsub is None:
        lm, lp = char_speeds(z0_minus, z0_plus, B, A, gas, closure)
        nsub = substeps_needed(float(np.max(np.maximum(lp, -np.asarray(lm)))), dxi, deta)
    pc = np.broadcast_to(np.asarray(contact_pressure, dtype=float), xi.shape)
    for _ in range(4):
        xf = np.linspace(xi[0], xi[-1], (nx - 1) * nsub + 1)
        if callable(wall_slope):
            ws = np.asarray(wall_slope(xf), dtype=float) * np.ones_like(xf)
        else:
            ws = np.interp(xf, xi, np.asarray(wall_slope, dtype=float))
        status, i, k, courant, zm, zp, lam_m, lam_p, p = kernels.march(
            z0_minus, z0_plus, B, A, ws, pc, dxi, deta, nsub, gas.gamma, closure.p_ref, nx)
        if status != kernels.CFL or not adaptive:
            break
        nsub = substeps_needed(courant * nsub * deta / dxi, dxi, deta)
    if status == kernels.CFL:
        raise CFLError(f"Courant number {courant:.3f} > 1 near x = {xi[min(i, nx - 1)]:.4g} "
                       f"with {nsub} substeps; refine the eta grid or coarsen xi")
    if status != kernels.OK:
        where = f"x = {xi[min(i, nx - 1)]:.6g}, eta = {eta[k]:.6g}"
        what = "lost supersonicity" if status == kernels.SONIC else "characteristic direction reversed"
        raise SonicLimitError(f"march {what} at {where}")
    return RiemannField(xi, eta, zm, zp, lam_m, lam_p, p, int(nsub), courant)


@dataclass
class CharacteristicPath:
    xi: np.ndarray
    eta: np.ndarray
    family: np.ndarray     # +1 on lambda+ pieces, -1 on lambda- pieces
    invariant: np.ndarray  # z- on lambda+ pieces, z+ on lambda- pieces
    reflections: int


def trace_characteristic(field: RiemannField, eta0: float, family: int, xi0: float = 0.0,
                         steps_per_cell: int = 4) -> CharacteristicPath:
    """Follow a characteristic through the march speeds with Heun steps.

    A path that hits the wall or the contact continues in the other family.
    Used for diagnostics only: the transported invariant should stay close to
    constant on each piece.
    """
    pts = (field.xi, field.eta)
    opts = {"bounds_error": False, "fill_value": None}
    lam = {1: RegularGridInterpolator(pts, field.lam_plus, **opts),
           -1: RegularGridInterpolator(pts, field.lam_minus, **opts)}
    inv = {1: RegularGridInterpolator(pts, field.z_minus, **opts),
           -1: RegularGridInterpolator(pts, field.z_plus, **opts)}
    lo, hi = field.eta[0], field.eta[-1]
    h = (field.xi[1] - field.xi[0]) / steps_per_cell
    x, e, fam = float(xi0), float(eta0), int(family)
    xs, es, fs, zs = [x], [e], [fam], [float(inv[fam]([[x, e]])[0])]
    nref = 0
    x_end = field.xi[-1]
    while x < x_end - 1e-14:
        hh = min(h, x_end - x)
        k1 = float(lam[fam]([[x, e]])[0])
        k2 = float(lam[fam]([[x + hh, min(max(e + hh * k1, lo), hi)]])[0])
        e_new = e + 0.5 * hh * (k1 + k2)
        x += hh
        if e_new > hi or e_new < lo:
            edge = hi if e_new > hi else lo
            e_new = 2.0 * edge - e_new
            fam = -fam
            nref += 1
        e = min(max(e_new, lo), hi)
        xs.append(x)
        es.append(e)
        fs.append(fam)
        zs.append(float(inv[fam]([[x, e]])[0]))
    return CharacteristicPath(np.array(xs), np.array(es), np.array(fs), np.array(zs), nref)


def wall_closure_defect(field: RiemannField, wall_slope: Callable | np.ndarray) -> float:
    ws = wall_slope(field.xi) if callable(wall_slope) else np.asarray(wall_slope)
    return float(np.max(np.abs(field.z_minus[:, 0] + field.z_plus[:, 0] - 2.0 * np.arctan(ws))))
