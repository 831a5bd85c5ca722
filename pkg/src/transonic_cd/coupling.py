"""Nested fixed points: linearization sweeps, contact flow angle, mass flux.

Loop order, outermost first: mass flux m_e (``solve_full``), linearization
sweeps (``solve_fixed_flux``), contact flow-angle iteration (inner loop of
each sweep).
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator

from . import subsonic as sub
from . import supersonic as sup
from .config import Controls, ProblemSpec
from .errors import DegenerateFlowError, DivergenceError, NonPhysicalAngleError, TransonicError
from .lagrangian import InletData, LagrangianDomain, NozzleGeometry, inlet_mass_flux, inverse_map, reconstruct_contact
from .thermo import BackgroundState, GasModel, validate_background

log = logging.getLogger(__name__)


@dataclass
class Problem:
    """Everything a solve needs, derived once from a ``ProblemSpec``."""

    gas: GasModel
    background: BackgroundState
    geom: NozzleGeometry
    inlet: InletData
    closure: sup.ThetaClosure
    controls: Controls
    nx: int
    ny_sub: int
    ny_sup: int

    @property
    def m_e_bar(self):
        return self.background.m_e

    @property
    def b_bar(self):
        s = self.background.sub
        return 1.0 / (s.rho * s.u)

    @property
    def p_bar(self):
        return self.background.sub.p

    @property
    def B_bar(self):
        s, g = self.background.sub, self.gas.gamma
        return 0.5 * s.u**2 + g * s.p / ((g - 1.0) * s.rho)

    @property
    def A_bar(self):
        s = self.background.sub
        return s.p / s.rho**self.gas.gamma

    @property
    def beta02_bar(self):
        return sub.background_beta02(self.b_bar, self.B_bar, self.A_bar, self.gas)

    def domain(self, m_e: float) -> LagrangianDomain:
        return LagrangianDomain(self.geom.L, m_e, self.inlet.m_h, self.nx, self.ny_sub, self.ny_sup)


def _supersonic_inlet(spec: ProblemSpec, geom: NozzleGeometry, closure, n_fine: int = 4097):
    """Sample the supersonic inlet on its eta-grid; data are given as functions of y."""
    bg, eps, gas = spec.background, spec.epsilon, spec.gas
    P = spec.profile
    y0 = geom.g_minus(0.0)

    def state(y):
        s = (y - y0) / (0.0 - y0)
        u = bg.sup.u * (1.0 + eps * P("sup_u")(s))
        v = bg.sup.u * eps * P("sup_v")(s)
        p = bg.sup.p * (1.0 + eps * P("sup_p")(s))
        rho = bg.sup.rho * (1.0 + eps * P("sup_rho")(s))
        return u, v, p, rho

    yf = np.linspace(y0, 0.0, n_fine)
    u, v, p, rho = state(yf)
    m_h = inlet_mass_flux(yf, rho * u)
    eta_f = cumulative_trapezoid(rho * u, yf, initial=0.0) - m_h
    eta = m_h * (np.linspace(0.0, 1.0, spec.ny_sup) - 1.0)
    y = PchipInterpolator(eta_f, yf)(eta)
    y[0], y[-1] = y0, 0.0
    u, v, p, rho = state(y)
    g = gas.gamma
    B = 0.5 * (u * u + v * v) + g * p / ((g - 1.0) * rho)
    A = p / rho**g
    omega = v / u
    zm, zp = sup.riemann_from_state(omega, p, B, A, gas, closure)
    return m_h, eta, y, np.asarray(zm), np.asarray(zp), B, A, p, omega


def build_problem(spec: ProblemSpec) -> Problem:
    """Assemble geometry, inlet data and closures from a validated spec."""
    bg, eps, gas = spec.background, spec.epsilon, spec.gas
    geom = NozzleGeometry(spec.length, bg.y_bottom, bg.y_top, spec.lower, spec.upper, eps)
    closure = sup.ThetaClosure(gas, bg.sup.p)
    P = spec.profile
    m_e_bar = bg.m_e
    g = gas.gamma
    B_bar = 0.5 * bg.sub.u**2 + g * bg.sub.p / ((g - 1.0) * bg.sub.rho)
    A_bar = bg.sub.p / bg.sub.rho**g
    p_bar = bg.sub.p
    pp, pB, pA, pw = P("sub_p"), P("sub_B"), P("sub_A"), P("exit_angle")

    def p0(eta):
        return p_bar * (1.0 + eps * pp(np.asarray(eta) / m_e_bar))

    def B0(eta):
        return B_bar * (1.0 + eps * pB(np.asarray(eta) / m_e_bar))

    def A0(eta):
        return A_bar * (1.0 + eps * pA(np.asarray(eta) / m_e_bar))

    def exit_angle(eta):
        return eps * pw(np.asarray(eta) / m_e_bar)

    m_h, eta_h, y_h, zm, zp, Bh, Ah, ph, wh = _supersonic_inlet(spec, geom, closure)
    inlet = InletData(p0, B0, A0, exit_angle, m_h, eta_h, y_h, zm, zp, Bh, Ah, ph, wh)
    return Problem(gas, bg, geom, inlet, closure, spec.controls, spec.nx, spec.ny_sub, spec.ny_sup)


def validate_problem(problem: Problem):
    """Background gate plus inlet/grid checks; returns the background report."""
    return validate_background(problem.background, problem.geom.L, problem.gas)


# ---------------------------------------------------------------------------


def update_flow_angle(z_sum, omega_cd, theta, end_value):
    """Damped flow-angle map with the exit endpoint pinned.

    ``z_sum`` is ``z- + z+`` on the contact, so the supersonic slope there is
    ``tan(z_sum / 2)``.
    """
    half = 0.5 * np.asarray(z_sum, dtype=float)
    if np.any(np.abs(half) >= 0.5 * math.pi - 1e-6):
        raise NonPhysicalAngleError("contact flow angle at or beyond vertical")
    if not 0.0 < theta <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    new = (1.0 - theta) * np.asarray(omega_cd, dtype=float) + theta * np.tan(half)
    new[-1] = end_value
    return new


def update_mass_flux(slope_eta, eta, g_plus0, m_e, trust=0.2):
    """Root of ``int_0^m d_eta phi(0, t) dt = g+(0)`` on the trapezoid table.

    The integrand is linear on each cell, so the root inside a cell is a
    quadratic root; beyond the last node the integrand is continued as a
    constant. Returns ``(m_hat, limited)``.
    """
    f = np.asarray(slope_eta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(~(f > 0.0)):
        raise DegenerateFlowError("d_eta phi at the inlet must be positive")
    cum = cumulative_trapezoid(f, eta, initial=0.0)
    target = float(g_plus0)
    if target <= 0.0:
        raise DegenerateFlowError("upper wall must start above the contact")
    if target >= cum[-1]:
        m_hat = eta[-1] + (target - cum[-1]) / f[-1]
    else:
        j = int(np.searchsorted(cum, target, side="right") - 1)
        h = eta[j + 1] - eta[j]
        d = target - cum[j]
        s = (f[j + 1] - f[j]) / h
        t = 2.0 * d / (f[j] + math.sqrt(max(f[j] * f[j] + 2.0 * s * d, 0.0)))
        m_hat = eta[j] + t
    limited = False
    step = trust * m_e
    if abs(m_hat - m_e) > step:
        warnings.warn(f"mass-flux update {m_hat:.6g} outside trust region around {m_e:.6g}; step limited",
                      RuntimeWarning, stacklevel=2)
        m_hat = m_e + math.copysign(step, m_hat - m_e)
        limited = True
    return float(m_hat), limited


def _c1_norm(f, dxi, deta):
    f = np.asarray(f)
    return (float(np.max(np.abs(f))) + float(np.max(np.abs(np.diff(f, axis=0)))) / dxi
            + float(np.max(np.abs(np.diff(f, axis=1)))) / deta)


def corner_metric(delta_phi, a, b, b_bar, xi, eta, radius):
    """Largest deviation-gradient magnitude within ``radius`` of the corner over the global largest."""
    g = np.hypot(a, b - b_bar)
    gmax = float(np.max(g))
    if gmax <= 1e-13 * max(1.0, abs(b_bar)):  # background: gradients are round-off
        return 0.0
    near = np.hypot(xi[:, None], eta[None, :]) <= radius
    return float(np.max(g[near])) / gmax


@dataclass
class FixedFluxResult:
    m_e: float
    domain: LagrangianDomain
    delta_phi: np.ndarray
    q: np.ndarray
    omega_cd: np.ndarray
    exit_slope: np.ndarray
    exit_shift: float
    field: sup.RiemannField
    p_contact: np.ndarray
    sweep_diffs: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    inner_counts: list = field(default_factory=list)
    corner: list = field(default_factory=list)
    lam_min: list = field(default_factory=list)


def solve_fixed_flux(m_e, problem: Problem, warm: FixedFluxResult | None = None) -> FixedFluxResult:
    """Linearization sweeps with the flow-angle loop inside, at fixed subsonic mass flux."""
    rep = validate_problem(problem)
    if not rep.passed:
        raise TransonicError("background validation failed:\n" + rep.summary())
    ctl, gas, geom, inl = problem.controls, problem.gas, problem.geom, problem.inlet
    dom = problem.domain(m_e)
    xi, eta = dom.xi, dom.eta_sub
    dxi, deta = dom.dxi, dom.deta_sub
    b_bar, p_bar, beta02_bar = problem.b_bar, problem.p_bar, problem.beta02_bar
    gplus_rel = geom.g_plus(xi) - geom.g_plus(0.0)
    top_slope = geom.g_plus(xi, 1)
    wall = geom.g_minus(xi, 1)
    om_e = np.asarray(inl.exit_angle(eta), dtype=float) * np.ones_like(eta)
    B_c, A_c = float(inl.B0(0.0)), float(inl.A0(0.0))
    shape = (dom.nx, dom.ny_sub)
    if warm is not None:
        dphi, q, omega, shift = warm.delta_phi.copy(), warm.q.copy(), warm.omega_cd.copy(), warm.exit_shift
        z_prev = (warm.field.z_minus, warm.field.z_plus)
        nsub = warm.field.nsub
    else:
        dphi, q, omega, shift = np.zeros(shape), np.zeros(dom.ny_sub), np.zeros(dom.nx), 0.0
        z_prev = (np.zeros((dom.nx, dom.ny_sup)), np.zeros((dom.nx, dom.ny_sup)))
        nsub = None
    omega[-1] = om_e[0] + shift
    res = FixedFluxResult(m_e, dom, dphi, q, omega, om_e + shift, shift, None, None)
    prev_diff = None
    for n in range(1, ctl.max_outer + 1):
        op = sub.linearized_coefficients(dphi, dxi, deta, eta, inl.B0, inl.A0, b_bar, p_bar, gas)
        cl = sub.boundary_closures(dphi, q, dxi, eta, inl.p0, inl.B0, inl.A0, b_bar, beta02_bar,
                                   omega[0], top_slope[0], gplus_rel, gas)
        system = sub.LinearizedEllipticSystem(op)
        hist_r = []
        omega_old_g = None
        for k in range(1, ctl.max_inner + 1):
            exit_vals = om_e + shift
            new_phi = system.solve(cl.g0, cl.gtop, sub.contact_trace(omega, dxi), exit_vals)
            p_e = sub.contact_pressure(new_phi, deta, b_bar, cl.q[0], omega, B_c, A_c, gas)
            fld = sup.march_supersonic(inl.z_minus, inl.z_plus, wall, p_e, inl.B_sup, inl.A_sup, xi,
                                       inl.eta_sup, gas, problem.closure, nsub)
            nsub = fld.nsub
            z_sum = fld.z_minus[:, -1] + fld.z_plus[:, -1]
            new_shift = fld.omega_contact[-1] - om_e[0] if ctl.exit_compat == "shift" else 0.0
            g_omega = update_flow_angle(z_sum, omega, ctl.damping, om_e[0] + new_shift)
            r = g_omega - omega
            diff = float(np.max(np.abs(r)))
            used = (omega, shift, exit_vals)
            if diff <= ctl.tol_inner:
                break
            if k > ctl.secant_after and omega_old_g is not None:
                # Anderson(1) mixing on the damped map
                dr = r - hist_r[-1]
                den = float(dr @ dr)
                gam = float(r @ dr) / den if den > 0.0 else 0.0
                nxt = g_omega - gam * (g_omega - omega_old_g)
                nxt[-1] = g_omega[-1]
            else:
                nxt = g_omega
            hist_r.append(r)
            omega_old_g = g_omega
            omega, shift = nxt, new_shift
        else:
            raise DivergenceError(f"flow-angle loop did not converge in {ctl.max_inner} iterations "
                                  f"(last change {diff:.3g}) at sweep {n}",
                                  {"sweep_diffs": res.sweep_diffs, "inner_last": diff})
        omega, shift, exit_vals = used
        d = _c1_norm(new_phi - dphi, dxi, deta) + float(
            max(np.max(np.abs(fld.z_minus - z_prev[0])), np.max(np.abs(fld.z_plus - z_prev[1]))))
        a, bgrad = sub.node_gradients(new_phi, dxi, deta, b_bar, cl.q, omega, top_slope, exit_vals)
        res.corner.append(corner_metric(new_phi, a, bgrad, b_bar, xi, eta, 0.1 * geom.L))
        res.sweep_diffs.append(d)
        res.ratios.append(d / prev_diff if prev_diff else float("nan"))
        res.inner_counts.append(k)
        res.lam_min.append(op.lam_min)
        log.debug("m_e=%.12g sweep %d: diff %.3e, inner %d", m_e, n, d, k)
        prev_diff = d
        dphi, q = new_phi, cl.q
        z_prev = (fld.z_minus, fld.z_plus)
        res.delta_phi, res.q, res.omega_cd = dphi, q, omega.copy()
        res.exit_slope, res.exit_shift, res.field, res.p_contact = exit_vals, shift, fld, p_e
        if d <= ctl.tol_outer:
            return res
    raise DivergenceError(f"linearization sweeps did not converge in {ctl.max_outer} sweeps "
                          f"(last difference {prev_diff:.3g})",
                          {"sweep_diffs": res.sweep_diffs, "ratios": res.ratios})


# ---------------------------------------------------------------------------


@dataclass
class TransonicSolution:
    problem: Problem
    m_e: float
    domain: LagrangianDomain
    stream: sub.StreamField
    riemann: sup.RiemannField
    omega_cd: np.ndarray
    fixed: FixedFluxResult
    sub_fields: dict
    sup_fields: dict
    y_sub: np.ndarray
    y_sup: np.ndarray
    g_cd: np.ndarray
    slope: np.ndarray
    top_defect: np.ndarray
    history: dict
    diagnostics: object = None

    @property
    def xi(self):
        return self.domain.xi


def assemble_solution(problem: Problem, res: FixedFluxResult, history: dict) -> TransonicSolution:
    """Primitive fields in both regions, physical ordinates and the contact line."""
    gas, geom, inl = problem.gas, problem.geom, problem.inlet
    dom = res.domain
    xi, eta = dom.xi, dom.eta_sub
    a, b = sub.node_gradients(res.delta_phi, dom.dxi, dom.deta_sub, problem.b_bar, res.q, res.omega_cd,
                              geom.g_plus(xi, 1), res.exit_slope)
    Bs = np.broadcast_to(inl.B0(eta), a.shape)
    As = np.broadcast_to(inl.A0(eta), a.shape)
    u, v, p, rho = sub.subsonic_primitives(a, b, Bs, As, gas)
    sub_fields = {"u": u, "v": v, "p": p, "rho": rho, "B": np.array(Bs), "A": np.array(As)}
    fld = res.field
    Bh = np.broadcast_to(inl.B_sup, fld.p.shape)
    Ah = np.broadcast_to(inl.A_sup, fld.p.shape)
    uh, vh, ph, rh = sup.supersonic_primitives(fld.omega, fld.p, Bh, Ah, gas)
    sup_fields = {"u": uh, "v": vh, "p": ph, "rho": rh, "B": np.array(Bh), "A": np.array(Ah)}
    y_sup, y_sub, top = inverse_map(rh * uh, rho * u, inl.eta_sup, eta, geom, xi)
    g_cd, slope = reconstruct_contact(y_sup, fld.omega_contact)
    stream = sub.StreamField(xi, eta, res.delta_phi, a, b, problem.b_bar)
    return TransonicSolution(problem, res.m_e, dom, stream, fld, res.omega_cd, res, sub_fields, sup_fields,
                             y_sub, y_sup, g_cd, slope, top, history)


def solve_full(problem: Problem) -> TransonicSolution:
    """Mass-flux iteration around fixed-flux solves, then reconstruction and diagnostics."""
    from .diagnostics import diagnostics

    ctl = problem.controls
    t0 = time.perf_counter()
    m = problem.m_e_bar
    warm = None
    hist = {"flux": [], "flux_steps": [], "sweeps": []}
    for it in range(1, ctl.max_flux + 1):
        try:
            res = solve_fixed_flux(m, problem, warm)
        except DivergenceError as exc:
            exc.history = {**hist, **exc.history, "m_e": m}
            raise
        dom = res.domain
        m_new, limited = update_mass_flux(problem.b_bar + res.q, dom.eta_sub, problem.geom.g_plus(0.0), m,
                                          ctl.trust_region)
        step = abs(m_new - m)
        hist["flux"].append(m)
        hist["flux_steps"].append(step)
        hist["sweeps"].append({"m_e": m, "diffs": list(res.sweep_diffs), "ratios": list(res.ratios),
                               "inner": list(res.inner_counts), "corner": list(res.corner),
                               "lam_min": list(res.lam_min), "limited": limited})
        log.info("flux iteration %d: m_e=%.15g, update %.3e, sweeps %d", it, m, step, len(res.sweep_diffs))
        if step < ctl.tol_flux:
            break
        m, warm = m_new, res
    else:
        raise DivergenceError(f"mass-flux loop did not converge in {ctl.max_flux} iterations", hist)
    hist["solve_seconds"] = time.perf_counter() - t0
    sol = assemble_solution(problem, res, hist)
    sol.diagnostics = diagnostics(sol, problem.gas)
    return sol


def deviation_norm(sol: TransonicSolution) -> float:
    """Size of the solution's departure from the background state."""
    dom = sol.domain
    d = sol.stream.delta_phi
    return (_c1_norm(d, dom.dxi, dom.deta_sub)
            + float(max(np.max(np.abs(sol.riemann.z_minus)), np.max(np.abs(sol.riemann.z_plus))))
            + abs(sol.m_e - sol.problem.m_e_bar))
