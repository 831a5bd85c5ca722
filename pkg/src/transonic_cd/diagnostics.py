"""Post-solve checks: contact jumps, sectionwise mass, streamline drift, weak residuals."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .thermo import GasModel

LAWS = ("mass", "x_momentum", "y_momentum", "energy")


@dataclass
class DiagnosticsReport:
    rh_pressure_jump: float
    rh_angle_jump: float
    mass_defect: float
    bernoulli_drift: float
    entropy_drift: float
    weak_residuals: dict
    weak_residuals_relative: dict
    corner_metric: float
    corner_history: list
    top_wall_defect: float
    wall_closure_defect: float
    exit_angle_mismatch: float
    m_e: float
    m_h: float
    history: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None  # strict JSON has no nan/inf
    return obj


def _bump(t):
    """(1 - 4 t^2)^4 on |t| < 1/2, zero elsewhere."""
    r = 1.0 - 4.0 * t * t
    return np.where(np.abs(t) < 0.5, r**4, 0.0)


def bump_family(L, m_e, m_h):
    """Tensor-product bumps: three x-centres times three eta-centres (one straddling the contact)."""
    xs = [(c * L, 0.5 * L) for c in (0.3, 0.5, 0.7)]
    w0 = 0.9 * min(m_e, m_h)
    es = [(-0.5 * m_h, 0.9 * m_h), (0.0, w0), (0.5 * m_e, 0.9 * m_e)]
    return [(cx, wx, ce, we) for cx, wx in xs for ce, we in es]


def _region_weak(F, G, xi, eta, zeta):
    """Cell quadrature of F d_xi zeta + G d_eta zeta with difference quotients of zeta.

    Constant F and G telescope to boundary terms, so the background gives
    round-off residuals.
    """
    hx = xi[1] - xi[0]
    he = eta[1] - eta[0]
    Fc = 0.25 * (F[1:, 1:] + F[:-1, 1:] + F[1:, :-1] + F[:-1, :-1])
    Gc = 0.25 * (G[1:, 1:] + G[:-1, 1:] + G[1:, :-1] + G[:-1, :-1])
    zx = 0.5 * ((zeta[1:, 1:] - zeta[:-1, 1:]) + (zeta[1:, :-1] - zeta[:-1, :-1])) / hx
    ze = 0.5 * ((zeta[1:, 1:] - zeta[1:, :-1]) + (zeta[:-1, 1:] - zeta[:-1, :-1])) / he
    area = hx * he
    return float(np.sum(Fc * zx + Gc * ze) * area), float(np.sum(np.abs(Fc * zx) + np.abs(Gc * ze)) * area)


def _fluxes(f, gas):
    u, v, p, rho = f["u"], f["v"], f["p"], f["rho"]
    B = 0.5 * (u * u + v * v) + gas.gamma * p / ((gas.gamma - 1.0) * rho)
    return {
        "mass": (1.0 / (rho * u), -v / u),
        "x_momentum": (u + p / (rho * u), -p * v / u),
        "y_momentum": (v, p),
        "energy": (B, np.zeros_like(B)),
    }


def weak_form_residuals(sub_fields, sup_fields, xi, eta_sub, eta_sup, gas: GasModel):
    """Largest absolute and relative weak residual per conservation law over the bump family."""
    m_e, m_h = eta_sub[-1], -eta_sup[0]
    fs, fh = _fluxes(sub_fields, gas), _fluxes(sup_fields, gas)
    out_abs = {k: 0.0 for k in LAWS}
    out_rel = {k: 0.0 for k in LAWS}
    for cx, wx, ce, we in bump_family(xi[-1], m_e, m_h):
        bx = _bump((xi - cx) / wx)[:, None]
        zs = bx * _bump((eta_sub - ce) / we)[None, :]
        zh = bx * _bump((eta_sup - ce) / we)[None, :]
        for law in LAWS:
            r1, s1 = _region_weak(*fs[law], xi, eta_sub, zs)
            r2, s2 = _region_weak(*fh[law], xi, eta_sup, zh)
            r = abs(r1 + r2)
            out_abs[law] = max(out_abs[law], r)
            scale = s1 + s2
            out_rel[law] = max(out_rel[law], r / scale if scale > 0.0 else 0.0)
    return out_abs, out_rel


def sectionwise_mass(sub_fields, sup_fields, y_sub, y_sup):
    """Trapezoid of rho*u over y on every section."""
    fs = sub_fields["rho"] * sub_fields["u"]
    fh = sup_fields["rho"] * sup_fields["u"]
    return np.trapezoid(fs, y_sub, axis=1) + np.trapezoid(fh, y_sup, axis=1)


def _drift(fields, gas):
    u, v, p, rho = fields["u"], fields["v"], fields["p"], fields["rho"]
    B = 0.5 * (u * u + v * v) + gas.gamma * p / ((gas.gamma - 1.0) * rho)
    A = p / rho**gas.gamma
    return (float(np.max(np.abs(B - fields["B"]) / np.abs(fields["B"]))),
            float(np.max(np.abs(A - fields["A"]) / np.abs(fields["A"]))))


def contact_jumps(sub_fields, sup_fields):
    dp = float(np.max(np.abs(sub_fields["p"][:, 0] - sup_fields["p"][:, -1])))
    ws = sub_fields["v"][:, 0] / sub_fields["u"][:, 0]
    wh = sup_fields["v"][:, -1] / sup_fields["u"][:, -1]
    return dp, float(np.max(np.abs(ws - wh)))


def diagnostics(sol, gas: GasModel) -> DiagnosticsReport:
    """Evaluate every residual of a converged solution (pure, never raises on bad values)."""
    dom = sol.domain
    problem = sol.problem
    dp, dw = contact_jumps(sol.sub_fields, sol.sup_fields)
    mass = sectionwise_mass(sol.sub_fields, sol.sup_fields, sol.y_sub, sol.y_sup)
    total = dom.m_e + dom.m_h
    mass_defect = float(np.max(np.abs(mass - total)) / total)
    bs, es_ = _drift(sol.sub_fields, gas)
    bh, eh = _drift(sol.sup_fields, gas)
    wabs, wrel = weak_form_residuals(sol.sub_fields, sol.sup_fields, dom.xi, dom.eta_sub, problem.inlet.eta_sup, gas)
    ws = problem.geom.g_minus(dom.xi, 1)
    wall = float(np.max(np.abs(sol.riemann.z_minus[:, 0] + sol.riemann.z_plus[:, 0] - 2.0 * np.arctan(ws))))
    corner_hist = [c for s in sol.history.get("sweeps", []) for c in s["corner"]]
    return DiagnosticsReport(
        rh_pressure_jump=dp,
        rh_angle_jump=dw,
        mass_defect=mass_defect,
        bernoulli_drift=max(bs, bh),
        entropy_drift=max(es_, eh),
        weak_residuals=wabs,
        weak_residuals_relative=wrel,
        corner_metric=corner_hist[-1] if corner_hist else 0.0,
        corner_history=corner_hist,
        top_wall_defect=float(np.max(np.abs(sol.top_defect))),
        wall_closure_defect=wall,
        exit_angle_mismatch=float(abs(sol.omega_cd[-1] - sol.riemann.omega_contact[-1])),
        m_e=float(dom.m_e),
        m_h=float(dom.m_h),
        history={k: v for k, v in sol.history.items() if k != "solve_seconds"},
        timings={"solve_seconds": sol.history.get("solve_seconds", 0.0)},
    )
