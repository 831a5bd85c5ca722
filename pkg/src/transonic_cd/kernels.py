"""Hot loops: subsonic density root, Theta inversion, characteristic march.

Each kernel has a numba-compiled scalar-loop version and a vectorized numpy
version with the same algorithm. The numba path is used when numba imports
and ``TRANSONIC_CD_NUMBA`` is not ``0``; ``set_backend`` switches at runtime.
"""

import math
import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

_NB_OPTS = {"cache": True, "nogil": True}

# march status codes
OK = 0
SONIC = 1
CFL = 2
REVERSED = 3

_backend = "numba" if (_HAVE_NUMBA and os.environ.get("TRANSONIC_CD_NUMBA", "1") != "0") else "numpy"


def backend():
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return _backend


def set_backend(name):
    """Select the kernel backend; returns the previous one."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    old, _backend = _backend, name
    return old


def _jit(fn):
    if _HAVE_NUMBA:
        return numba.njit(**_NB_OPTS)(fn)
    return fn


# ---------------------------------------------------------------------------
# closed-form pieces, valid for numpy arrays and for numba scalars


def mach_sq_from_p(p, B, A, gamma):
    """Squared Mach number of the isentrope (A) state with pressure p on Bernoulli level B."""
    c2 = gamma * (A * p ** (gamma - 1.0)) ** (1.0 / gamma)
    return (2.0 * B - 2.0 * c2 / (gamma - 1.0)) / c2


def prandtl_meyer(m2, gamma):
    """Prandtl-Meyer angle as a function of the squared Mach number (m2 >= 1)."""
    s = np.sqrt(m2 - 1.0)
    k = np.sqrt((gamma + 1.0) / (gamma - 1.0))
    return k * np.arctan(s / k) - np.arctan(s)


def theta_closed(p, B, A, gamma, p_ref):
    """Pressure-to-angle potential, zero at p_ref and increasing in p."""
    return prandtl_meyer(mach_sq_from_p(p_ref, B, A, gamma), gamma) - prandtl_meyer(
        mach_sq_from_p(p, B, A, gamma), gamma
    )


def theta_slope(p, B, A, gamma):
    """d(theta)/dp = sqrt(q^2 - c^2) / (rho c q^2)."""
    rho = (p / A) ** (1.0 / gamma)
    c2 = gamma * p / rho
    q2 = 2.0 * B - 2.0 * c2 / (gamma - 1.0)
    return np.sqrt(q2 - c2) / (rho * np.sqrt(c2) * q2)


def sonic_pressure(B, A, gamma):
    """Pressure at which the state on (B, A) becomes sonic."""
    c2 = 2.0 * (gamma - 1.0) * B / (gamma + 1.0)
    return (c2 / (gamma * A ** (1.0 / gamma))) ** (gamma / (gamma - 1.0))


def theta_range(B, A, gamma, p_ref):
    """Open interval of theta values reachable by supersonic pressures."""
    k = np.sqrt((gamma + 1.0) / (gamma - 1.0))
    nu_ref = prandtl_meyer(mach_sq_from_p(p_ref, B, A, gamma), gamma)
    return nu_ref - 0.5 * np.pi * (k - 1.0), nu_ref


_mach_sq_nb = _jit(mach_sq_from_p)
_pm_nb = _jit(prandtl_meyer)


def _theta_scalar(p, B, A, gamma, p_ref):
    return _pm_nb(_mach_sq_nb(p_ref, B, A, gamma), gamma) - _pm_nb(_mach_sq_nb(p, B, A, gamma), gamma)


_theta_nb = _jit(_theta_scalar)
_slope_nb = _jit(theta_slope)
_psonic_nb = _jit(sonic_pressure)


# ---------------------------------------------------------------------------
# subsonic density root of K rho^(g+1) - B rho^2 + chi = 0


def _density_root_scalar(chi, B, K, gamma, tol, maxiter):
    gm1 = gamma - 1.0
    rho_s = (2.0 * B / ((gamma + 1.0) * K)) ** (1.0 / gm1)
    f_s = K * rho_s ** (gamma + 1.0) - B * rho_s * rho_s + chi
    if not f_s < 0.0:
        return np.nan
    lo = rho_s
    hi = (B / K) ** (1.0 / gm1)
    rho = hi
    for _ in range(maxiter):
        f = K * rho ** (gamma + 1.0) - B * rho * rho + chi
        if f > 0.0:
            hi = rho
        else:
            lo = rho
        df = (gamma + 1.0) * K * rho**gamma - 2.0 * B * rho
        new = rho - f / df if df != 0.0 else 0.5 * (lo + hi)
        if not (new > lo and new <= hi):
            new = 0.5 * (lo + hi)
        if abs(new - rho) <= tol * new:
            return new
        rho = new
    return rho


_density_root_scalar_nb = _jit(_density_root_scalar)


@_jit
def _density_root_nb(chi, B, K, gamma, tol, maxiter):  # pragma: no cover - compiled
    out = np.empty(chi.size)
    for i in range(chi.size):
        out[i] = _density_root_scalar_nb(chi[i], B[i], K[i], gamma, tol, maxiter)
    return out


def _density_root_np(chi, B, K, gamma, tol, maxiter):
    gm1 = gamma - 1.0
    rho_s = (2.0 * B / ((gamma + 1.0) * K)) ** (1.0 / gm1)
    f_s = K * rho_s ** (gamma + 1.0) - B * rho_s**2 + chi
    bad = ~(f_s < 0.0)
    lo = rho_s.copy()
    hi = (B / K) ** (1.0 / gm1)
    rho = hi.copy()
    active = ~bad
    for _ in range(maxiter):
        if not active.any():
            break
        r = rho[active]
        f = K[active] * r ** (gamma + 1.0) - B[active] * r * r + chi[active]
        l, h = lo[active], hi[active]
        pos = f > 0.0
        h = np.where(pos, r, h)
        l = np.where(pos, l, r)
        df = (gamma + 1.0) * K[active] * r**gamma - 2.0 * B[active] * r
        with np.errstate(divide="ignore", invalid="ignore"):
            new = r - f / df
        outside = ~((new > l) & (new <= h))
        new = np.where(outside, 0.5 * (l + h), new)
        done = np.abs(new - r) <= tol * new
        lo[active], hi[active], rho[active] = l, h, new
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    rho[bad] = np.nan
    return rho


def density_root(chi, B, K, gamma, tol=1e-12, maxiter=100):
    """Larger positive root of ``K rho^(gamma+1) - B rho^2 + chi``; NaN where none exists.

    All array arguments broadcast together; the result has the broadcast shape.
    """
    chi, B, K = np.broadcast_arrays(
        np.asarray(chi, dtype=float), np.asarray(B, dtype=float), np.asarray(K, dtype=float)
    )
    shape = chi.shape
    chi, B, K = (np.ascontiguousarray(a).ravel() for a in (chi, B, K))
    if _backend == "numba":
        out = _density_root_nb(chi, B, K, float(gamma), float(tol), int(maxiter))
    else:
        out = _density_root_np(chi, B, K, float(gamma), float(tol), int(maxiter))
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# inverse of theta


def _theta_inverse_scalar(target, B, A, gamma, p_ref, guess, tol, maxiter):
    k = math.sqrt((gamma + 1.0) / (gamma - 1.0))
    nu_ref = _pm_nb(_mach_sq_nb(p_ref, B, A, gamma), gamma)
    if not (target < nu_ref and target > nu_ref - 0.5 * math.pi * (k - 1.0)):
        return np.nan
    lo = 0.0
    hi = _psonic_nb(B, A, gamma)
    p = guess
    if not (p > lo and p < hi):
        p = 0.5 * hi
    for _ in range(maxiter):
        f = _theta_nb(p, B, A, gamma, p_ref) - target
        if f == 0.0:
            return p
        if f > 0.0:
            hi = p
        else:
            lo = p
        new = p - f / _slope_nb(p, B, A, gamma)
        if not (new > lo and new < hi):
            new = 0.5 * (lo + hi)
        if abs(new - p) <= tol * new:
            return new
        p = new
    return p


_theta_inverse_scalar_nb = _jit(_theta_inverse_scalar)


@_jit
def _theta_inverse_nb(target, B, A, gamma, p_ref, guess, tol, maxiter):  # pragma: no cover
    out = np.empty(target.size)
    for i in range(target.size):
        out[i] = _theta_inverse_scalar_nb(target[i], B[i], A[i], gamma, p_ref, guess[i], tol, maxiter)
    return out


def _theta_inverse_np(target, B, A, gamma, p_ref, guess, tol, maxiter):
    lo_t, hi_t = theta_range(B, A, gamma, p_ref)
    bad = ~((target < hi_t) & (target > lo_t))
    lo = np.zeros_like(target)
    hi = sonic_pressure(B, A, gamma)
    p = np.where((guess > lo) & (guess < hi), guess, 0.5 * hi)
    active = ~bad
    with np.errstate(invalid="ignore", divide="ignore"):
        for _ in range(maxiter):
            if not active.any():
                break
            idx = np.flatnonzero(active)
            pa, Ba, Aa = p[idx], B[idx], A[idx]
            f = theta_closed(pa, Ba, Aa, gamma, p_ref) - target[idx]
            l, h = lo[idx], hi[idx]
            pos = f > 0.0
            h = np.where(pos, pa, h)
            l = np.where(pos, l, pa)
            new = pa - f / theta_slope(pa, Ba, Aa, gamma)
            new = np.where(f == 0.0, pa, new)
            outside = ~((new > l) & (new < h)) & (f != 0.0)
            new = np.where(outside, 0.5 * (l + h), new)
            done = (np.abs(new - pa) <= tol * new) | (f == 0.0)
            lo[idx], hi[idx], p[idx] = l, h, new
            active[idx[done]] = False
    p[bad] = np.nan
    return p


def theta_inverse(target, B, A, gamma, p_ref, guess=None, tol=1e-14, maxiter=100):
    """Pressure p with theta(p) = target; NaN where the target is out of range."""
    target, B, A = np.broadcast_arrays(
        np.asarray(target, dtype=float), np.asarray(B, dtype=float), np.asarray(A, dtype=float)
    )
    shape = target.shape
    if guess is None:
        guess = np.full(shape, float(p_ref))
    guess = np.broadcast_to(np.asarray(guess, dtype=float), shape)
    args = [np.ascontiguousarray(a).ravel() for a in (target, B, A, guess)]
    if _backend == "numba":
        out = _theta_inverse_nb(args[0], args[1], args[2], float(gamma), float(p_ref), args[3], float(tol), int(maxiter))
    else:
        out = _theta_inverse_np(args[0], args[1], args[2], float(gamma), float(p_ref), args[3], float(tol), int(maxiter))
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# characteristic march


def _speeds_scalar(zm, zp, p, B, A, gamma):
    half = 0.5 * (zm + zp)
    w = math.tan(half)
    rho = (p / A) ** (1.0 / gamma)
    c2 = gamma * p / rho
    q2 = 2.0 * B - 2.0 * c2 / (gamma - 1.0)
    u2 = q2 / (1.0 + w * w)
    if not (u2 > c2 and q2 > c2):
        return np.nan, np.nan
    u = math.sqrt(u2)
    fac = rho * u * c2 / (u2 - c2)
    r = math.sqrt(q2 - c2) / math.sqrt(c2)
    return fac * (w - r), fac * (w + r)


_speeds_scalar_nb = _jit(_speeds_scalar)


def _level_nb_impl(zm, zp, B, A, gamma, p_ref, p, lm, lp, tol):
    """Invert every node of one xi-level and store pressure and speeds; returns first bad node or -1."""
    for k in range(zm.size):
        pk = _theta_inverse_scalar_nb(0.5 * (zm[k] - zp[k]), B[k], A[k], gamma, p_ref, p[k], tol, 100)
        if not (pk > 0.0):
            return k, SONIC
        p[k] = pk
        a, b = _speeds_scalar_nb(zm[k], zp[k], pk, B[k], A[k], gamma)
        if not (b > 0.0 and a < 0.0):
            return k, REVERSED
        lm[k] = a
        lp[k] = b
    return -1, OK


_level_nb = _jit(_level_nb_impl)


def _march_nb_impl(zm0, zp0, B, A, wall_slope, p_contact, dxi, deta, nsub, gamma, p_ref,
                   out_zm, out_zp, out_lm, out_lp, out_p):
    nx = out_zm.shape[0]
    K = zm0.size - 1
    tol = 1e-14
    zm = zm0.copy()
    zp = zp0.copy()
    nzm = np.empty(K + 1)
    nzp = np.empty(K + 1)
    p = np.full(K + 1, p_ref)
    lm = np.empty(K + 1)
    lp = np.empty(K + 1)
    bad, code = _level_nb(zm, zp, B, A, gamma, p_ref, p, lm, lp, tol)
    if bad >= 0:
        return code, 0, bad, 0.0
    out_zm[0, :] = zm
    out_zp[0, :] = zp
    out_lm[0, :] = lm
    out_lp[0, :] = lp
    out_p[0, :] = p
    h = dxi / nsub
    r = h / deta
    step = 0
    cmax = 0.0
    for i in range(1, nx):
        for s in range(nsub):
            step += 1
            for k in range(K + 1):
                c = max(lp[k], -lm[k]) * r
                if c > cmax:
                    cmax = c
            if cmax > 1.0:
                return CFL, i, -1, cmax
            for k in range(1, K + 1):
                nzm[k] = zm[k] - r * lp[k] * (zm[k] - zm[k - 1])
            for k in range(0, K):
                nzp[k] = zp[k] - r * lm[k] * (zp[k + 1] - zp[k])
            nzm[0] = 2.0 * math.atan(wall_slope[step]) - nzp[0]
            frac = (s + 1.0) / nsub
            pe = (1.0 - frac) * p_contact[i - 1] + frac * p_contact[i]
            th = _theta_nb(pe, B[K], A[K], gamma, p_ref)
            if not (th == th):
                return SONIC, i, K, 0.0
            nzp[K] = nzm[K] - 2.0 * th
            zm[:] = nzm
            zp[:] = nzp
            bad, code = _level_nb(zm, zp, B, A, gamma, p_ref, p, lm, lp, tol)
            if bad >= 0:
                return code, i, bad, 0.0
        out_zm[i, :] = zm
        out_zp[i, :] = zp
        out_lm[i, :] = lm
        out_lp[i, :] = lp
        out_p[i, :] = p
    return OK, nx, -1, cmax


_march_nb = _jit(_march_nb_impl)


def _level_np(zm, zp, B, A, gamma, p_ref, p_guess):
    p = _theta_inverse_np(0.5 * (zm - zp), B, A, gamma, p_ref, p_guess, 1e-14, 100)
    bad = ~(p > 0.0)
    if bad.any():
        return p, None, None, int(np.flatnonzero(bad)[0]), SONIC
    w = np.tan(0.5 * (zm + zp))
    rho = (p / A) ** (1.0 / gamma)
    c2 = gamma * p / rho
    q2 = 2.0 * B - 2.0 * c2 / (gamma - 1.0)
    u2 = q2 / (1.0 + w * w)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.sqrt(u2)
        fac = rho * u * c2 / (u2 - c2)
        rr = np.sqrt(q2 - c2) / np.sqrt(c2)
        lm, lp = fac * (w - rr), fac * (w + rr)
    ok = (u2 > c2) & (q2 > c2) & (lp > 0.0) & (lm < 0.0)
    if not ok.all():
        return p, lm, lp, int(np.flatnonzero(~ok)[0]), REVERSED
    return p, lm, lp, -1, OK


def _march_np(zm0, zp0, B, A, wall_slope, p_contact, dxi, deta, nsub, gamma, p_ref,
              out_zm, out_zp, out_lm, out_lp, out_p):
    nx = out_zm.shape[0]
    K = zm0.size - 1
    zm = zm0.copy()
    zp = zp0.copy()
    p, lm, lp, bad, code = _level_np(zm, zp, B, A, gamma, p_ref, np.full(K + 1, p_ref))
    if bad >= 0:
        return code, 0, bad, 0.0
    out_zm[0], out_zp[0], out_lm[0], out_lp[0], out_p[0] = zm, zp, lm, lp, p
    h = dxi / nsub
    r = h / deta
    step = 0
    cmax = 0.0
    for i in range(1, nx):
        for s in range(nsub):
            step += 1
            cmax = max(cmax, float(np.max(np.maximum(lp, -lm))) * r)
            if cmax > 1.0:
                return CFL, i, -1, cmax
            nzm = np.empty(K + 1)
            nzp = np.empty(K + 1)
            nzm[1:] = zm[1:] - r * lp[1:] * (zm[1:] - zm[:-1])
            nzp[:-1] = zp[:-1] - r * lm[:-1] * (zp[1:] - zp[:-1])
            nzm[0] = 2.0 * math.atan(wall_slope[step]) - nzp[0]
            frac = (s + 1.0) / nsub
            pe = (1.0 - frac) * p_contact[i - 1] + frac * p_contact[i]
            with np.errstate(invalid="ignore"):
                th = float(theta_closed(pe, B[K], A[K], gamma, p_ref))
            if not np.isfinite(th):
                return SONIC, i, K, 0.0
            nzp[K] = nzm[K] - 2.0 * th
            zm, zp = nzm, nzp
            p, lm, lp, bad, code = _level_np(zm, zp, B, A, gamma, p_ref, p)
            if bad >= 0:
                return code, i, bad, 0.0
        out_zm[i], out_zp[i], out_lm[i], out_lp[i], out_p[i] = zm, zp, lm, lp, p
    return OK, nx, -1, cmax


def march(zm0, zp0, B, A, wall_slope, p_contact, dxi, deta, nsub, gamma, p_ref, nx):
    """Upwind march of (z-, z+) over ``nx`` xi-levels.

    ``wall_slope`` holds g-'(x) at the ``(nx-1)*nsub + 1`` substep abscissae,
    ``p_contact`` the contact pressure at the ``nx`` xi-levels. Returns
    ``(status, i, k, courant, zm, zp, lm, lp, p)``.
    """
    K1 = len(zm0)
    outs = [np.empty((nx, K1)) for _ in range(5)]
    args = (
        np.ascontiguousarray(zm0, dtype=float),
        np.ascontiguousarray(zp0, dtype=float),
        np.ascontiguousarray(B, dtype=float),
        np.ascontiguousarray(A, dtype=float),
        np.ascontiguousarray(wall_slope, dtype=float),
        np.ascontiguousarray(p_contact, dtype=float),
        float(dxi),
        float(deta),
        int(nsub),
        float(gamma),
        float(p_ref),
    )
    fn = _march_nb if _backend == "numba" else _march_np
    status, i, k, courant = fn(*args, *outs)
    return (int(status), int(i), int(k), float(courant), *outs)
