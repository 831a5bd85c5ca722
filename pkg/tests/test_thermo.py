import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from transonic_cd.errors import DomainError
from transonic_cd.thermo import (MACH_GATE, BackgroundState, GasModel, PrimitiveState, bernoulli, entropy,
                                 entropy_multiplier, mach_number, reference_background, sound_speed,
                                 validate_background)


def test_reference_layers(gas, background):
    assert sound_speed(background.sub.p, background.sub.rho, gas) == pytest.approx(1.0, rel=1e-15)
    assert mach_number(background.sup, gas) == pytest.approx(1.2, rel=1e-14)
    assert background.m_e == 0.5
    assert background.m_h == pytest.approx(0.6, rel=1e-15)
    # B = u^2/2 + gamma p / ((gamma-1) rho)
    assert bernoulli(background.sub, gas) == pytest.approx(2.625, rel=1e-15)
    assert bernoulli(background.sup, gas) == pytest.approx(12.88, rel=1e-14)
    assert entropy_multiplier(background.sub, gas) == pytest.approx(1 / 1.4, rel=1e-15)


def test_classification(gas, background):
    assert background.sub.classify(gas) == "subsonic"
    assert background.sup.classify(gas) == "supersonic"
    # |q| > c but u < c: not usable as a supersonic layer
    assert PrimitiveState(0.5, 1.0, 1 / 1.4, 1.0).classify(gas) == "transonic"


def test_entropy_uses_kappa_and_c_nu():
    s = PrimitiveState(1.0, 0.0, 2.0, 1.0)
    assert entropy(s, GasModel(1.4, 2.0, 3.0)) == pytest.approx(0.0, abs=1e-15)
    assert entropy(s, GasModel(1.4, 1.0, 3.0)) == pytest.approx(3.0 * math.log(2.0))


@pytest.mark.parametrize("kw", [{"gamma": 1.0}, {"kappa": 0.0}, {"c_nu": -1.0}])
def test_gas_rejects_bad_constants(kw):
    with pytest.raises(DomainError):
        GasModel(**kw)


def test_state_rejects_nonpositive():
    with pytest.raises(DomainError):
        PrimitiveState(1.0, 0.0, -1.0, 1.0)
    with pytest.raises(DomainError):
        sound_speed(np.array([1.0, 0.0]), 1.0, GasModel())


def test_sound_speed_broadcasts(gas):
    c = sound_speed(np.array([1.0, 2.0]), np.array([1.4, 1.4]), gas)
    np.testing.assert_allclose(c, [1.0, math.sqrt(2.0)], rtol=1e-15)


def test_reference_background_passes(gas, background):
    rep = validate_background(background, 1.0, gas)
    assert rep.passed, rep.summary()


def test_long_duct_fails_mach_gate(gas, background):
    rep = validate_background(background, 2.0, gas)
    assert not rep.passed
    names = [c.name for c in rep.failures]
    assert "mach gate" in names
    assert MACH_GATE in rep.summary()


def test_pressure_mismatch_reported_not_raised(gas):
    bg = BackgroundState(PrimitiveState(0.5, 0.0, 0.72, 1.0), PrimitiveState(2.4, 0.0, 1 / 1.4, 0.25))
    rep = validate_background(bg, 1.0, gas)
    assert [c.name for c in rep.failures] == ["pressure match"]


def test_margins_use_delta0(gas):
    p = 1 / 1.4
    bg = BackgroundState(PrimitiveState(0.97, 0.0, p, 1.0), PrimitiveState(2.4, 0.0, p, 0.25))
    assert "subsonic margin" in [c.name for c in validate_background(bg, 1.0, gas).failures]


@given(L=st.floats(0.05, 4.0))
def test_mach_gate_threshold(L):
    # gate holds exactly when M_h^2 > 1 + L^2/4, with M_h = 1.2
    rep = validate_background(reference_background(), L, GasModel())
    gate = {c.name: c for c in rep.checks}["mach gate"]
    assert gate.passed == (1.44 > 1.0 + 0.25 * L * L)


@given(u=st.floats(0.01, 5.0), v=st.floats(-2.0, 2.0), p=st.floats(0.01, 10.0), rho=st.floats(0.01, 10.0))
def test_bernoulli_is_enthalpy_plus_kinetic(u, v, p, rho):
    gas = GasModel()
    s = PrimitiveState(u, v, p, rho)
    c = sound_speed(p, rho, gas)
    assert bernoulli(s, gas) == pytest.approx(0.5 * (u * u + v * v) + c * c / (gas.gamma - 1.0), rel=1e-12)
