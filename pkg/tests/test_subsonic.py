import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from oracles import density_by_bisection
from transonic_cd import subsonic as sub
from transonic_cd.errors import DataError, DomainError, EllipticityError, SonicDegeneracyError
from transonic_cd.thermo import GasModel

GAS = GasModel()
B_BAR, A_BAR, B_GRAD, P_BAR = 2.625, 1 / 1.4, 2.0, 1 / 1.4


def const(v):
    return lambda eta: np.full(np.shape(eta), v, dtype=float)


def test_background_density_and_pressure():
    assert sub.density_from_stream_gradient((0.0, B_GRAD), B_BAR, A_BAR, GAS) == pytest.approx(1.0, rel=1e-14)
    assert sub.pressure_from_stream_gradient((0.0, B_GRAD), B_BAR, A_BAR, GAS) == pytest.approx(P_BAR, rel=1e-14)


def test_background_partials():
    # a11 = 1/(rho b) = 1/2, a22 = c^2 / (rho b^3 (c^2 - q^2)) = 1/6, no cross terms
    P = sub.stream_partials((0.0, B_GRAD), B_BAR, A_BAR, GAS)
    assert P.dN1_da == pytest.approx(0.5, rel=1e-14)
    assert P.dp_db == pytest.approx(1 / 6, rel=1e-13)
    assert P.dN1_db == pytest.approx(0.0, abs=1e-15)
    assert P.dp_da == pytest.approx(0.0, abs=1e-15)
    assert sub.background_beta02(B_GRAD, B_BAR, A_BAR, GAS) == pytest.approx(1 / 6, rel=1e-13)


def test_density_matches_bisection_on_random_tuples():
    a, b, B, A = subsonic_tuples(100, seed=11)
    got = sub.density_from_stream_gradient((a, b), B, A, GAS)
    want = [density_by_bisection(*t, GAS.gamma) for t in zip(a, b, B, A)]
    np.testing.assert_allclose(got, want, rtol=1e-11)


def subsonic_tuples(n, seed):
    """Random (a, b, B, A) with a subsonic root, by rejection."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        t = (rng.uniform(-0.4, 0.4), rng.uniform(1.5, 3.0), rng.uniform(2.4, 2.9), rng.uniform(0.65, 0.8))
        if (t[0] ** 2 + 1) / (2 * t[1] ** 2) < 0.999 * sub.critical_chi(t[2], t[3], GAS):
            out.append(t)
    return tuple(np.array(c) for c in zip(*out))


def test_sonic_degeneracy_reports_chi():
    crit = sub.critical_chi(B_BAR, A_BAR, GAS)
    b = math.sqrt(1.0 / (2.0 * crit * 1.01))
    with pytest.raises(SonicDegeneracyError) as info:
        sub.density_from_stream_gradient((0.0, b), B_BAR, A_BAR, GAS)
    assert info.value.chi > info.value.chi_crit


def test_nonpositive_eta_gradient_rejected():
    with pytest.raises(DomainError):
        sub.density_from_stream_gradient((0.0, -1.0), B_BAR, A_BAR, GAS)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-0.3, 0.3), b=st.floats(1.7, 2.5), da=st.floats(-1.0, 1.0), db=st.floats(-1.0, 1.0))
def test_partials_match_finite_differences(a, b, da, db):
    h = 1e-6
    n = math.hypot(da, db) or 1.0
    da, db = da / n, db / n
    P = sub.stream_partials((a, b), B_BAR, A_BAR, GAS)
    fp = sub.flux_functions((a + h * da, b + h * db), B_BAR, A_BAR, GAS)
    fm = sub.flux_functions((a - h * da, b - h * db), B_BAR, A_BAR, GAS)
    d_n1 = (fp[0] - fm[0]) / (2 * h)
    d_p = (fp[1] - fm[1]) / (2 * h)
    # central differences lose accuracy near the sonic limit, hence rel 1e-5
    assert d_n1 == pytest.approx(P.dN1_da * da + P.dN1_db * db, rel=1e-5, abs=1e-8)
    assert d_p == pytest.approx(P.dp_da * da + P.dp_db * db, rel=1e-5, abs=1e-8)


def test_linearized_coefficients_on_background():
    eta = np.linspace(0.0, 0.5, 9)
    op = sub.linearized_coefficients(np.zeros((17, 9)), 1 / 16, 0.5 / 8, eta, const(B_BAR), const(A_BAR),
                                     B_GRAD, P_BAR, GAS)
    np.testing.assert_allclose(op.a11, 0.5, rtol=1e-13)
    np.testing.assert_allclose(op.a22, 1 / 6, rtol=1e-12)
    np.testing.assert_allclose(op.b2, 0.0, atol=1e-15)
    assert op.lam_min == pytest.approx(1 / 6, rel=1e-12)


def test_linearized_coefficients_reject_loss_of_ellipticity():
    eta = np.linspace(0.0, 0.5, 9)
    # a deviation pushing the gradient into the sonic range
    dphi = np.tile(-1.3 * eta, (17, 1))
    with pytest.raises((EllipticityError, SonicDegeneracyError)):
        sub.linearized_coefficients(dphi, 1 / 16, 0.5 / 8, eta, const(B_BAR), const(A_BAR), B_GRAD, P_BAR, GAS)


def _grid(nx, ny, m=0.5):
    return np.linspace(0.0, 1.0, nx), np.linspace(0.0, m, ny)


@pytest.mark.parametrize("exact, d_xi, cross", [
    (lambda x, e: x, lambda e: np.ones_like(e), 0.0),
    (lambda x, e: x * e, lambda e: e, 1.0),
])
def test_linear_and_bilinear_reproduced_exactly(exact, d_xi, cross):
    nx, ny = 17, 9
    x, e = _grid(nx, ny)
    e12 = 0.03
    op = sub.EllipticOperator.constant(nx, ny, x[1], e[1], 0.5, 1 / 6, e12)
    X, E = np.meshgrid(x, e, indexing="ij")
    u = exact(X, E)
    # only the mixed derivative survives: (a12 + a21) d_xi d_eta u
    source = np.full(u.shape, 2 * e12 * cross)
    got = sub.solve_linearized_elliptic(op, u[0], u[:, -1], u[:, 0], d_xi(e), source)
    np.testing.assert_allclose(got, u, atol=1e-12)


def _manufactured():
    x, e = sp.symbols("x e")
    phi = sp.sin(1.3 * x) * sp.exp(e) + x**2 * e
    a11 = 0.5 + 0.2 * x * e
    a12 = 0.05 * sp.cos(x + e)
    a21 = 0.04 * sp.sin(x - e)
    a22 = sp.Rational(1, 6) + 0.05 * sp.sin(sp.pi * x)
    px, pe = sp.diff(phi, x), sp.diff(phi, e)
    src = sp.diff(a11 * px + a12 * pe, x) + sp.diff(a21 * px + a22 * pe, e)
    f = {k: sp.lambdify((x, e), v, "numpy") for k, v in
         dict(phi=phi, px=px, a11=a11, a12=a12, a21=a21, a22=a22, src=src).items()}
    return f


MANUFACTURED = _manufactured()


def _bcast(v, shape):
    return np.broadcast_to(np.asarray(v, dtype=float), shape).copy()


def manufactured_error(n):
    f = MANUFACTURED
    x, e = _grid(n, n)
    hx, he = x[1], e[1]
    xm, em = 0.5 * (x[1:] + x[:-1]), 0.5 * (e[1:] + e[:-1])
    XF, EF = np.meshgrid(xm, e, indexing="ij")   # xi-faces
    XG, EG = np.meshgrid(x, em, indexing="ij")   # eta-faces
    op = sub.EllipticOperator(hx, he, _bcast(f["a11"](XF, EF), XF.shape), _bcast(f["a12"](XF, EF), XF.shape),
                              _bcast(f["a21"](XG, EG), XG.shape), _bcast(f["a22"](XG, EG), XG.shape),
                              np.zeros(XF.shape), np.zeros(n - 1), 0.1, 1.0)
    X, E = np.meshgrid(x, e, indexing="ij")
    u = f["phi"](X, E)
    got = sub.solve_linearized_elliptic(op, u[0], u[:, -1], u[:, 0], f["px"](1.0, e), f["src"](X, E))
    return float(np.max(np.abs(got - u)))


def test_variable_coefficients_second_order():
    # 17 -> 33 is still pre-asymptotic (ratio 4.5); compare from 33 on
    e1, e2, e3 = (manufactured_error(n) for n in (33, 65, 129))
    assert 3.5 <= e1 / e2 <= 4.5
    assert 3.5 <= e2 / e3 <= 4.5


def test_corner_mismatch_is_data_error():
    op = sub.EllipticOperator.constant(17, 9, 1 / 16, 1 / 16, 0.5, 1 / 6)
    sys_ = sub.LinearizedEllipticSystem(op)
    g0 = np.zeros(9)
    with pytest.raises(DataError):
        sys_.solve(g0, np.zeros(17), np.full(17, 0.1), np.zeros(9))
    with pytest.raises(DataError):
        sys_.solve(np.zeros(8), np.zeros(17), np.zeros(17), np.zeros(9))


def test_factorization_reused():
    op = sub.EllipticOperator.constant(17, 9, 1 / 16, 1 / 16, 0.5, 1 / 6)
    sys_ = sub.LinearizedEllipticSystem(op)
    x, e = _grid(17, 9, 0.5)
    for k in (1.0, 2.0):
        got = sys_.solve(np.zeros(9), k * x, k * x, np.full(9, k))
        np.testing.assert_allclose(got, k * x[:, None] * np.ones((1, 9)), atol=1e-12)


def test_inlet_trace_for_uniform_pressure_rise():
    # p0 = p_bar (1 + eps) on the background: g0 = eps p_bar eta / beta02_bar = 6 eps p_bar eta
    eps = 1e-3
    eta = np.linspace(0.0, 0.5, 17)
    xi = np.linspace(0.0, 1.0, 33)
    cl = sub.boundary_closures(np.zeros((33, 17)), np.zeros(17), xi[1], eta, const(P_BAR * (1 + eps)),
                               const(B_BAR), const(A_BAR), B_GRAD, 1 / 6, 0.0, 0.0, np.zeros(33), GAS)
    np.testing.assert_allclose(cl.g0, 6.0 * eps * P_BAR * eta, rtol=1e-11, atol=1e-16)
    np.testing.assert_allclose(cl.gtop, cl.g0[-1], rtol=1e-14)


def test_contact_trace_integrates_slope():
    x = np.linspace(0.0, 1.0, 65)
    tr = sub.contact_trace(2.0 * x, x[1])
    np.testing.assert_allclose(tr, x * x, atol=1e-4)
    assert tr[0] == 0.0


def test_subsonic_primitives_background():
    u, v, p, rho = sub.subsonic_primitives(np.zeros(3), np.full(3, 2.0), B_BAR, A_BAR, GAS)
    np.testing.assert_allclose(u, 0.5, rtol=1e-14)
    np.testing.assert_allclose(v, 0.0)
    np.testing.assert_allclose(p, P_BAR, rtol=1e-14)
    np.testing.assert_allclose(rho, 1.0, rtol=1e-14)
