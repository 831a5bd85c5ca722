"""Acceptance criteria, one pass/fail line each (see the terminal summary).

Runtimes are measured after a warm-up call so compiled kernels are loaded
from the numba cache rather than compiled inside the timed region.
"""

import math
import time

import numpy as np
import pytest

from oracles import density_by_bisection, theta_integrand
from test_subsonic import manufactured_error, subsonic_tuples
from transonic_cd import coupling
from transonic_cd import subsonic as sub
from transonic_cd import supersonic as sup
from transonic_cd.cli import check_spec
from transonic_cd.config import ProblemSpec
from transonic_cd.errors import ConfigError
from transonic_cd.profiles import Profile
from transonic_cd.thermo import MACH_GATE, GasModel, reference_background

GAS = GasModel()
P_BAR = 1 / 1.4


def reference(**kw):
    return ProblemSpec(GAS, reference_background(), **kw)


def mixed_case(eps):
    """Inlet pressure bump, both walls bumped, exit angle: every boundary channel active."""
    spec = reference(epsilon=eps, lower=Profile("cosine-bump"), upper=Profile("sine", 0.5))
    return spec.with_profiles(sub_p=Profile("cosine-bump"), exit_angle=Profile("sine"))


def pressure_case(eps):
    return reference(epsilon=eps).with_profiles(sub_p=Profile("cosine-bump"))


def solve(spec):
    return coupling.solve_full(coupling.build_problem(spec))


@pytest.fixture(scope="module", autouse=True)
def warm_up():
    solve(reference(nx=17, ny_sub=17, ny_sup=17))


@pytest.fixture(scope="module")
def mixed_1e3():
    t0 = time.perf_counter()
    sol = solve(mixed_case(1e-3))
    return sol, time.perf_counter() - t0


def test_01_background_exactness(record):
    t0 = time.perf_counter()
    sol = solve(reference())
    elapsed = time.perf_counter() - t0
    bg = reference_background()
    dev = 0.0
    for fields, state in ((sol.sub_fields, bg.sub), (sol.sup_fields, bg.sup)):
        for key in ("u", "v", "p", "rho"):
            dev = max(dev, float(np.max(np.abs(fields[key] - getattr(state, key)))))
    sweeps = sum(len(s["diffs"]) for s in sol.history["sweeps"])
    gcd = float(np.max(np.abs(sol.g_cd)))
    ok = sweeps <= 2 and abs(sol.m_e - 0.5) <= 1e-12 and dev <= 1e-10 and gcd <= 1e-12 and elapsed <= 5.0
    record("1 background exactness", ok,
           f"sweeps={sweeps} |m_e-0.5|={abs(sol.m_e - 0.5):.2e} field dev={dev:.2e} max|g_cd|={gcd:.2e} "
           f"time={elapsed:.2f}s")


def test_02_density_root_oracle(record):
    a, b, B, A = subsonic_tuples(100, seed=2024)
    sub.density_from_stream_gradient((a[:2], b[:2]), B[:2], A[:2], GAS)
    t0 = time.perf_counter()
    got = np.asarray(sub.density_from_stream_gradient((a, b), B, A, GAS))
    elapsed = time.perf_counter() - t0
    want = np.array([density_by_bisection(*t, GAS.gamma) for t in zip(a, b, B, A)])
    err = float(np.max(np.abs(got - want)))
    record("2 density root vs bisection", err <= 1e-10 and elapsed <= 1.0,
           f"max|diff|={err:.2e} over 100 tuples, time={elapsed * 1e3:.1f}ms")


def test_03_theta_roundtrip(record):
    closure = sup.ThetaClosure(GAS, P_BAR)
    B, A = 12.88, P_BAR / 0.25**1.4
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = 0.0
    for omega, p in zip(rng.uniform(-0.1, 0.1, 100), rng.uniform(0.9 * P_BAR, 1.1 * P_BAR, 100)):
        zm, zp = sup.riemann_from_state(omega, p, B, A, GAS, closure)
        w2, p2 = sup.state_from_riemann(zm, zp, B, A, GAS, closure)
        worst = max(worst, abs(w2 - omega), abs(p2 - p))
    h = 1e-5
    slope_err = 0.0
    for p in np.linspace(0.9 * P_BAR, 1.1 * P_BAR, 11):
        fd = (closure.value(p + h, B, A) - closure.value(p - h, B, A)) / (2 * h)
        exact = theta_integrand(p, B, A, GAS.gamma)
        slope_err = max(slope_err, abs(fd - exact) / exact)
    elapsed = time.perf_counter() - t0
    record("3 Theta round trip", worst <= 1e-9 and slope_err <= 1e-6 and elapsed <= 2.0,
           f"roundtrip={worst:.2e} slope rel err={slope_err:.2e} time={elapsed:.2f}s")


def _duct(nx, ny):
    """Pure supersonic duct: smooth inlet pressure bump, flat wall, frozen contact pressure."""
    spec = reference(epsilon=1e-2, nx=nx, ny_sup=ny).with_profiles(sup_p=Profile("cosine-bump"))
    problem = coupling.build_problem(spec)
    inl = problem.inlet
    xi = np.linspace(0.0, 1.0, nx)
    return sup.march_supersonic(inl.z_minus, inl.z_plus, np.zeros(nx), np.full(nx, P_BAR), inl.B_sup, inl.A_sup,
                                xi, inl.eta_sup, GAS, problem.closure)


def test_04_march_first_order(record):
    _duct(33, 17)
    t0 = time.perf_counter()
    runs = {n: _duct(n, (n + 1) // 2) for n in (129, 257, 513)}
    elapsed = time.perf_counter() - t0

    def on_coarse(f):
        s = (f.xi.size - 1) // 128
        return np.stack([f.z_minus[::s, ::s], f.z_plus[::s, ::s]])

    ref = 2.0 * on_coarse(runs[513]) - on_coarse(runs[257])
    e1 = float(np.max(np.abs(on_coarse(runs[129]) - ref)))
    e2 = float(np.max(np.abs(on_coarse(runs[257]) - ref)))
    ratio = e1 / e2
    record("4 characteristic march order", abs(ratio - 2.0) <= 0.3 and elapsed <= 30.0,
           f"err129={e1:.3e} err257={e2:.3e} ratio={ratio:.3f} time={elapsed:.2f}s")


def test_05_rankine_hugoniot(record, mixed_1e3):
    sol, elapsed = mixed_1e3
    d = sol.diagnostics
    ok = d.rh_pressure_jump <= 1e-6 * P_BAR and d.rh_angle_jump <= 1e-6 and elapsed <= 60.0
    record("5 contact jumps", ok, f"max|[p]|={d.rh_pressure_jump:.2e} max|[v/u]|={d.rh_angle_jump:.2e} "
                                  f"time={elapsed:.2f}s")


def test_06_conservation(record, mixed_1e3):
    d = mixed_1e3[0].diagnostics
    ok = d.mass_defect <= 1e-6 and d.bernoulli_drift <= 1e-6 and d.entropy_drift <= 1e-6
    record("6 conservation", ok, f"mass={d.mass_defect:.2e} B drift={d.bernoulli_drift:.2e} "
                                 f"A drift={d.entropy_drift:.2e}")


@pytest.mark.parametrize("case", [pressure_case, mixed_case], ids=["inlet-pressure", "walls+pressure+exit"])
def test_07_linear_response(record, case):
    norms = [coupling.deviation_norm(solve(case(eps))) for eps in (1e-2, 5e-3, 2.5e-3)]
    r1, r2 = norms[0] / norms[1], norms[1] / norms[2]
    ok = 1.8 <= r1 <= 2.2 and 1.8 <= r2 <= 2.2
    record(f"7 linear response ({case.__name__.replace('_case', '')})", ok,
           f"norms={', '.join(f'{n:.4e}' for n in norms)} ratios={r1:.3f}, {r2:.3f}")


def test_08_contraction(record, mixed_1e3):
    hist = mixed_1e3[0].history
    late = [r for s in hist["sweeps"] for r in s["ratios"][2:]]
    worst = max(late) if late else 0.0
    steps = hist["flux_steps"]
    decreasing = all(b < a for a, b in zip(steps, steps[1:]))
    record("8 contraction", worst <= 0.9 and decreasing,
           f"max sweep ratio after sweep 2={worst:.3f} flux steps={', '.join(f'{s:.1e}' for s in steps)}")


def test_09_gates_and_manufactured(record):
    try:
        check_spec(reference(length=2.0))
        gate_msg = ""
    except ConfigError as exc:
        gate_msg = str(exc)
    gate_ok = MACH_GATE in gate_msg

    nx, ny = 17, 9
    x, e = np.linspace(0, 1, nx), np.linspace(0, 0.5, ny)
    X, E = np.meshgrid(x, e, indexing="ij")
    op = sub.EllipticOperator.constant(nx, ny, x[1], e[1], 0.5, 1 / 6)
    exact_err = 0.0
    for u, slope in ((X, np.ones(ny)), (X * E / 0.5, e / 0.5)):
        got = sub.solve_linearized_elliptic(op, u[0], u[:, -1], u[:, 0], slope)
        exact_err = max(exact_err, float(np.max(np.abs(got - u))))
    e33, e65, e129 = (manufactured_error(n) for n in (33, 65, 129))
    r1, r2 = e33 / e65, e65 / e129
    ok = gate_ok and exact_err <= 1e-12 and abs(r1 - 4) <= 0.5 and abs(r2 - 4) <= 0.5
    record("9 gates and manufactured solutions", ok,
           f"mach gate rejected={gate_ok} exact err={exact_err:.1e} variable-coefficient ratios={r1:.2f}, {r2:.2f}")


def test_10_determinism_and_golden(record, tmp_path):
    from conftest import REFERENCE_CFG, golden_dir
    from transonic_cd.cli import main

    a, b = solve(reference()), solve(reference())
    same = all(np.array_equal(a.sub_fields[k], b.sub_fields[k]) and np.array_equal(a.sup_fields[k], b.sup_fields[k])
               for k in ("u", "v", "p", "rho")) and np.array_equal(a.g_cd, b.g_cd)
    out = tmp_path / "bg"
    code = main(["solve", "--config", str(REFERENCE_CFG), "--grid", "17,17,17", "--out-dir", str(out)])
    golden = code == 0 and all((out / n).read_bytes() == (golden_dir() / n).read_bytes()
                               for n in ("fields_lagrangian.csv", "fields_physical.csv"))
    record("10 determinism and golden files", same and golden, f"bit-identical repeat={same} golden match={golden}")
