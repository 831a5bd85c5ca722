"""Subsonic region: density closure, flux functions, linearized elliptic solve.

The stream function phi satisfies ``d_xi phi = v/u`` and ``d_eta phi = 1/(rho u)``.
Gradients are passed around as pairs ``(a, b) = (d_xi phi, d_eta phi)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.linalg import splu

from . import kernels
from .errors import DataError, DomainError, EllipticityError, SingularOperatorError, SonicDegeneracyError
from .thermo import GasModel

_GL_X, _GL_W = leggauss(4)
GL_NODES = 0.5 * (_GL_X + 1.0)
GL_WEIGHTS = 0.5 * _GL_W


def _pair(dphi):
    a, b = dphi
    return np.asarray(a, dtype=float), np.asarray(b, dtype=float)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def sonic_density(B, A, gas: GasModel):
    g = gas.gamma
    K = g * np.asarray(A, dtype=float) / (g - 1.0)
    return (2.0 * np.asarray(B, dtype=float) / ((g + 1.0) * K)) ** (1.0 / (g - 1.0))


def critical_chi(B, A, gas: GasModel):
    """Largest chi for which a subsonic density root exists."""
    g = gas.gamma
    K = g * np.asarray(A, dtype=float) / (g - 1.0)
    rs = sonic_density(B, A, gas)
    return B * rs**2 - K * rs ** (g + 1.0)


def density_from_stream_gradient(dphi, B, A, gas: GasModel):
    """Subsonic root of ``K rho^(gamma+1) - B rho^2 + chi = 0``.

    ``K = gamma A / (gamma - 1)`` and ``chi = (a^2 + 1) / (2 b^2)``.
    Broadcasts over array inputs.
    """
    a, b = _pair(dphi)
    if np.any(~(b > 0.0)):
        raise DomainError("d_eta phi must be positive")
    B = np.asarray(B, dtype=float)
    A = np.asarray(A, dtype=float)
    chi = (a * a + 1.0) / (2.0 * b * b)
    K = gas.gamma * A / (gas.gamma - 1.0)
    rho = kernels.density_root(chi, B, K, gas.gamma)
    bad = np.isnan(rho)
    if bad.any():
        idx = np.unravel_index(np.flatnonzero(bad)[0], bad.shape) if bad.ndim else ()
        c = np.broadcast_to(chi, bad.shape)[idx]
        crit = critical_chi(np.broadcast_to(B, bad.shape)[idx], np.broadcast_to(A, bad.shape)[idx], gas)
        raise SonicDegeneracyError(float(c), float(crit), where=idx if idx else None)
    return _out(rho)


def pressure_from_stream_gradient(dphi, B, A, gas: GasModel):
    rho = density_from_stream_gradient(dphi, B, A, gas)
    return _out(np.asarray(A) * np.asarray(rho) ** gas.gamma)


def flux_functions(dphi, B, A, gas: GasModel):
    """``(N1, N2) = (a / (rho b), p)``."""
    a, b = _pair(dphi)
    rho = np.asarray(density_from_stream_gradient((a, b), B, A, gas))
    return _out(a / (rho * b)), _out(np.asarray(A) * rho**gas.gamma)


@dataclass
class StreamPartials:
    rho: np.ndarray
    dN1_da: np.ndarray
    dN1_db: np.ndarray
    dp_da: np.ndarray
    dp_db: np.ndarray


def stream_partials(dphi, B, A, gas: GasModel) -> StreamPartials:
    """Analytic derivatives of N1 and p with respect to (a, b)."""
    a, b = _pair(dphi)
    A = np.asarray(A, dtype=float)
    g = gas.gamma
    rho = np.asarray(density_from_stream_gradient((a, b), B, A, gas))
    c2 = g * A * rho ** (g - 1.0)
    q2 = (1.0 + a * a) / (rho * b) ** 2
    D = c2 - q2
    drho_da = -a / (rho * b * b * D)
    drho_db = (1.0 + a * a) / (rho * b**3 * D)
    dN1_da = 1.0 / (rho * b) - a / (rho * rho * b) * drho_da
    dN1_db = -a / (rho * b * b) - a / (rho * rho * b) * drho_db
    return StreamPartials(rho, dN1_da, dN1_db, c2 * drho_da, c2 * drho_db)


def path_partials(base, delta, B, A, gas: GasModel):
    """Gauss-Legendre average over tau in [0, 1] of the partials at ``base + tau*delta``.

    Returns ``(a11, a12, a21, a22)``.
    """
    a0, b0 = _pair(base)
    da, db = _pair(delta)
    out = [0.0, 0.0, 0.0, 0.0]
    for t, w in zip(GL_NODES, GL_WEIGHTS):
        P = stream_partials((a0 + t * da, b0 + t * db), B, A, gas)
        out[0] = out[0] + w * P.dN1_da
        out[1] = out[1] + w * P.dN1_db
        out[2] = out[2] + w * P.dp_da
        out[3] = out[3] + w * P.dp_db
    return tuple(out)


def _lambda_min_max(a11, a12, a21, a22):
    m = 0.5 * (a11 + a22)
    d = np.hypot(0.5 * (a11 - a22), 0.5 * (a12 + a21))
    return m - d, m + d


@dataclass
class EllipticOperator:
    """Face coefficients of ``d_xi(a11 d_xi + a12 d_eta) + d_eta(a21 d_xi + a22 d_eta)``.

    ``a11, a12, b1`` live on xi-faces (i+1/2, j), shape (N, M+1);
    ``a21, a22`` on eta-faces (i, j+1/2), shape (N+1, M); ``b2`` on eta-face
    levels, shape (M,). The discrete problem is
    ``div(a grad dphi) + div(b) = source``.
    """

    dxi: float
    deta: float
    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    lam_min: float
    lam_max: float

    @property
    def shape(self):
        return self.a21.shape[0], self.a11.shape[1]

    @classmethod
    def constant(cls, nx, ny, dxi, deta, e1, e2, e12=0.0):
        N, M = nx - 1, ny - 1
        lo, hi = _lambda_min_max(e1, e12, e12, e2)
        return cls(dxi, deta, np.full((N, M + 1), e1), np.full((N, M + 1), e12),
                   np.full((N + 1, M), e12), np.full((N + 1, M), e2),
                   np.zeros((N, M + 1)), np.zeros(M), float(lo), float(hi))


def face_gradients(dphi, dxi, deta):
    """Deviation gradients on xi-faces and eta-faces (cross terms by 4-point averages)."""
    f = np.asarray(dphi)
    # xi-faces (i+1/2, j)
    gx_x = (f[1:, :] - f[:-1, :]) / dxi
    fe = 0.5 * (f[1:, :] + f[:-1, :])
    gx_e = np.empty_like(fe)
    gx_e[:, 1:-1] = (fe[:, 2:] - fe[:, :-2]) / (2.0 * deta)
    gx_e[:, 0] = (-3.0 * fe[:, 0] + 4.0 * fe[:, 1] - fe[:, 2]) / (2.0 * deta)
    gx_e[:, -1] = (3.0 * fe[:, -1] - 4.0 * fe[:, -2] + fe[:, -3]) / (2.0 * deta)
    # eta-faces (i, j+1/2)
    ge_e = (f[:, 1:] - f[:, :-1]) / deta
    fx = 0.5 * (f[:, 1:] + f[:, :-1])
    ge_x = np.empty_like(fx)
    ge_x[1:-1, :] = (fx[2:, :] - fx[:-2, :]) / (2.0 * dxi)
    ge_x[0, :] = (-3.0 * fx[0, :] + 4.0 * fx[1, :] - fx[2, :]) / (2.0 * dxi)
    ge_x[-1, :] = (3.0 * fx[-1, :] - 4.0 * fx[-2, :] + fx[-3, :]) / (2.0 * dxi)
    return (gx_x, gx_e), (ge_x, ge_e)


def linearized_coefficients(delta_phi, dxi, deta, eta, B0, A0, b_bar, p_bar, gas: GasModel) -> EllipticOperator:
    """Path-averaged flux partials around the background gradient ``(0, b_bar)``.

    ``delta_phi`` is the previous deviation on the (xi, eta) grid, ``eta`` the
    physical eta nodes, ``B0`` and ``A0`` callables of eta.
    """
    delta_phi = np.asarray(delta_phi, dtype=float)
    (gx_x, gx_e), (ge_x, ge_e) = face_gradients(delta_phi, dxi, deta)
    eta = np.asarray(eta, dtype=float)
    eta_mid = 0.5 * (eta[1:] + eta[:-1])
    Bn, An = B0(eta)[None, :], A0(eta)[None, :]
    Bm, Am = B0(eta_mid)[None, :], A0(eta_mid)[None, :]
    xa = path_partials((0.0, b_bar), (gx_x, gx_e), Bn, An, gas)
    ea = path_partials((0.0, b_bar), (ge_x, ge_e), Bm, Am, gas)
    lo1, hi1 = _lambda_min_max(*xa)
    lo2, hi2 = _lambda_min_max(*ea)
    lam_min = float(min(lo1.min(), lo2.min()))
    lam_max = float(max(hi1.max(), hi2.max()))
    if not lam_min > 0.0:
        raise EllipticityError(f"linearized operator not elliptic: min eigenvalue {lam_min:.3g}")
    b2 = pressure_from_stream_gradient((0.0, b_bar), B0(eta_mid), A0(eta_mid), gas) - p_bar
    N = delta_phi.shape[0] - 1
    return EllipticOperator(dxi, deta, xa[0], xa[1], ea[2], ea[3],
                            np.zeros((N, delta_phi.shape[1])), np.asarray(b2, dtype=float),
                            lam_min, lam_max)


@dataclass
class ClosureTraces:
    g0: np.ndarray       # inlet Dirichlet trace of the deviation
    gtop: np.ndarray     # top-wall Dirichlet trace on the xi-grid
    q: np.ndarray        # inlet d_eta of the deviation (integrand of g0)
    beta01: np.ndarray
    beta02: np.ndarray


def background_beta02(b_bar, B_bar, A_bar, gas: GasModel) -> float:
    return float(stream_partials((0.0, b_bar), B_bar, A_bar, gas).dp_db)


def boundary_closures(delta_phi, q_prev, dxi, eta, p0, B0, A0, b_bar, beta02_bar,
                      omega_in, top_slope_in, gplus_rel, gas: GasModel) -> ClosureTraces:
    """Inlet and top Dirichlet traces from the inlet pressure condition.

    ``delta_phi`` and ``q_prev`` come from the previous iterate (lagged).
    ``omega_in`` and ``top_slope_in`` are the contact and top-wall slopes at
    x = 0, ``gplus_rel`` is ``g+(xi) - g+(0)`` on the xi-grid.
    """
    f = np.asarray(delta_phi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    d1 = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dxi)
    d1[0] = omega_in
    d1[-1] = top_slope_in
    d2 = np.asarray(q_prev, dtype=float)
    Bv, Av = B0(eta), A0(eta)
    _, _, beta01, beta02 = path_partials((0.0, b_bar), (d1, d2), Bv, Av, gas)
    p_bg = pressure_from_stream_gradient((0.0, b_bar), Bv, Av, gas)
    q = (p0(eta) - p_bg - beta01 * d1 - (beta02 - beta02_bar) * d2) / beta02_bar
    g0 = cumulative_trapezoid(q, eta, initial=0.0)
    gtop = np.asarray(gplus_rel, dtype=float) + g0[-1]
    return ClosureTraces(g0, gtop, q, np.asarray(beta01), np.asarray(beta02))


class LinearizedEllipticSystem:
    """Assembled and factorized discrete operator, reusable for many right-hand sides.

    Unknowns are all nodes (i, j) of the (N+1) x (M+1) grid; boundary rows
    are Dirichlet on inlet, contact and top, one-sided second-order Neumann
    on the exit.
    """

    def __init__(self, op: EllipticOperator, residual_tol: float = 1e-12):
        self.op = op
        self.residual_tol = residual_tol
        self.N, self.M = op.shape[0] - 1, op.shape[1] - 1
        self.matrix = self._assemble()
        try:
            self.lu = splu(self.matrix.tocsc())
        except RuntimeError as exc:
            raise SingularOperatorError(f"factorization failed: {exc}") from exc

    def _assemble(self):
        op, N, M = self.op, self.N, self.M
        hx, he = op.dxi, op.deta
        n = (N + 1) * (M + 1)

        def idx(i, j):
            return i * (M + 1) + j

        rows, cols, vals = [], [], []

        def put(r, c, v):
            r, c, v = np.broadcast_arrays(r, c, v)
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(v.ravel())

        I, J = np.meshgrid(np.arange(1, N), np.arange(1, M), indexing="ij")
        r = idx(I, J)
        aE11, aE12 = op.a11[I, J], op.a12[I, J]
        aW11, aW12 = op.a11[I - 1, J], op.a12[I - 1, J]
        aN21, aN22 = op.a21[I, J], op.a22[I, J]
        aS21, aS22 = op.a21[I, J - 1], op.a22[I, J - 1]
        cx = 1.0 / (hx * hx)
        ce = 1.0 / (he * he)
        cxe = 1.0 / (4.0 * hx * he)
        # xi-flux differences
        put(r, idx(I + 1, J), aE11 * cx)
        put(r, idx(I, J), -(aE11 + aW11) * cx)
        put(r, idx(I - 1, J), aW11 * cx)
        for di, w in ((0, aE12), (1, aE12)):
            put(r, idx(I + di, J + 1), w * cxe)
            put(r, idx(I + di, J - 1), -w * cxe)
        for di, w in ((-1, aW12), (0, aW12)):
            put(r, idx(I + di, J + 1), -w * cxe)
            put(r, idx(I + di, J - 1), w * cxe)
        # eta-flux differences
        put(r, idx(I, J + 1), aN22 * ce)
        put(r, idx(I, J), -(aN22 + aS22) * ce)
        put(r, idx(I, J - 1), aS22 * ce)
        for dj, w in ((0, aN21), (1, aN21)):
            put(r, idx(I + 1, J + dj), w * cxe)
            put(r, idx(I - 1, J + dj), -w * cxe)
        for dj, w in ((-1, aS21), (0, aS21)):
            put(r, idx(I + 1, J + dj), -w * cxe)
            put(r, idx(I - 1, J + dj), w * cxe)
        # exit Neumann rows
        je = np.arange(1, M)
        re = idx(N, je)
        put(re, idx(N, je), 1.5 / hx)
        put(re, idx(N - 1, je), -2.0 / hx)
        put(re, idx(N - 2, je), 0.5 / hx)
        # Dirichlet rows: inlet column, contact row, top row
        bd = np.unique(np.concatenate([idx(0, np.arange(M + 1)), idx(np.arange(1, N + 1), 0),
                                       idx(np.arange(1, N + 1), M)]))
        put(bd, bd, 1.0)
        A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        return A.tocsr()

    def rhs(self, g0, gtop, contact, exit_slope, source=None, corner_tol=1e-9):
        op, N, M = self.op, self.N, self.M
        g0, gtop, contact, exit_slope = (np.asarray(x, dtype=float) for x in (g0, gtop, contact, exit_slope))
        if g0.shape != (M + 1,) or exit_slope.shape != (M + 1,):
            raise DataError("inlet and exit traces must have one value per eta node")
        if gtop.shape != (N + 1,) or contact.shape != (N + 1,):
            raise DataError("top and contact traces must have one value per xi node")
        scale = max(1.0, float(np.max(np.abs(g0))), float(np.max(np.abs(gtop))))
        if abs(g0[0] - contact[0]) > corner_tol * scale:
            raise DataError(f"inlet/contact corner mismatch {g0[0] - contact[0]:.3g}")
        if abs(g0[-1] - gtop[0]) > corner_tol * scale:
            raise DataError(f"inlet/top corner mismatch {g0[-1] - gtop[0]:.3g}")
        b = np.zeros((N + 1, M + 1))
        div_b = np.zeros((N - 1, M - 1))
        if np.any(op.b2):
            div_b += ((op.b2[1:] - op.b2[:-1]) / op.deta)[None, :]
        if np.any(op.b1):
            div_b += (op.b1[1:, 1:-1] - op.b1[:-1, 1:-1]) / op.dxi
        b[1:N, 1:M] = -div_b
        if source is not None:
            b[1:N, 1:M] += np.asarray(source, dtype=float)[1:N, 1:M]
        b[N, 1:M] = exit_slope[1:M]
        b[1:, 0] = contact[1:]
        b[1:, M] = gtop[1:]
        b[0, :] = g0
        return b.ravel()

    def solve(self, g0, gtop, contact, exit_slope, source=None):
        rhs = self.rhs(g0, gtop, contact, exit_slope, source)
        x = self.lu.solve(rhs)
        res = self._residual(x, rhs)
        if res > self.residual_tol:
            x = x + self.lu.solve(rhs - self.matrix @ x)
            res = self._residual(x, rhs)
        if not np.isfinite(res) or res > self.residual_tol:
            raise SingularOperatorError(f"linear solve residual {res:.3g} above {self.residual_tol:g}")
        self.last_residual = res
        return x.reshape(self.N + 1, self.M + 1)

    def _residual(self, x, rhs):
        r = self.matrix @ x - rhs
        scale = abs(self.matrix).max() * np.max(np.abs(x)) + np.max(np.abs(rhs))
        return float(np.max(np.abs(r)) / scale) if scale > 0.0 else float(np.max(np.abs(r)))


def solve_linearized_elliptic(op: EllipticOperator, g0, gtop, contact, exit_slope, source=None):
    """One-shot assemble, factorize and solve; returns the deviation on the grid."""
    return LinearizedEllipticSystem(op).solve(g0, gtop, contact, exit_slope, source)


def contact_trace(omega_cd, dxi):
    """Dirichlet contact trace: cumulative trapezoid of the flow-angle tangent."""
    return cumulative_trapezoid(np.asarray(omega_cd, dtype=float), dx=dxi, initial=0.0)


def node_gradients(delta_phi, dxi, deta, b_bar, q, omega_cd, top_slope, exit_slope):
    """Full stream gradient (a, b) at every node, honouring boundary data."""
    f = np.asarray(delta_phi, dtype=float)
    a = np.empty_like(f)
    d = np.empty_like(f)
    a[1:-1] = (f[2:] - f[:-2]) / (2.0 * dxi)
    a[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dxi)
    a[-1] = exit_slope
    d[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2.0 * deta)
    d[:, 0] = (-3.0 * f[:, 0] + 4.0 * f[:, 1] - f[:, 2]) / (2.0 * deta)
    d[:, -1] = (3.0 * f[:, -1] - 4.0 * f[:, -2] + f[:, -3]) / (2.0 * deta)
    d[0] = q
    a[:, 0] = omega_cd
    a[:, -1] = top_slope
    return a, b_bar + d


def contact_pressure(delta_phi, deta, b_bar, q0, omega_cd, B, A, gas: GasModel):
    """Subsonic pressure along the contact from the one-sided eta derivative."""
    f = np.asarray(delta_phi, dtype=float)
    d = (-3.0 * f[:, 0] + 4.0 * f[:, 1] - f[:, 2]) / (2.0 * deta)
    d[0] = q0
    return pressure_from_stream_gradient((np.asarray(omega_cd), b_bar + d), B, A, gas)


@dataclass
class StreamField:
    """Stream function ``phi = b_bar * eta + delta_phi`` on the subsonic grid."""

    xi: np.ndarray
    eta: np.ndarray
    delta_phi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    b_bar: float

    @property
    def phi(self):
        return self.b_bar * self.eta[None, :] + self.delta_phi


def subsonic_primitives(a, b, B, A, gas: GasModel):
    """(u, v, p, rho) from nodal stream gradients."""
    rho = np.asarray(density_from_stream_gradient((a, b), B, A, gas))
    u = 1.0 / (rho * b)
    return u, a * u, A * rho**gas.gamma, rho
