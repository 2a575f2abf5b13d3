import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ftl2lwr import velocity
from ftl2lwr.velocity import DomainError, V_of_y, flux, v_of_rho, verify_assumptions


@pytest.mark.parametrize("rho,expected", [(0.0, 1.0), (1.0, 0.0), (0.5, 0.5)])
def test_v_of_rho_greenshields(gs, rho, expected):
    assert v_of_rho(gs, rho) == expected


@pytest.mark.parametrize("y,expected", [(1.0, 0.0), (2.0, 0.5), (math.inf, 1.0)])
def test_V_of_y_greenshields(gs, y, expected):
    assert V_of_y(gs, y) == expected


@pytest.mark.parametrize("rho,expected", [(0.0, 0.0), (1.0, 0.0), (0.5, 0.25)])
def test_flux_greenshields(gs, rho, expected):
    assert flux(gs, rho) == expected


@pytest.mark.parametrize("rho", [-1e-6, 1.0 + 1e-6, float("nan")])
def test_rho_outside_domain(gs, rho):
    with pytest.raises(DomainError):
        v_of_rho(gs, rho)
    with pytest.raises(DomainError):
        flux(gs, rho)


def test_spacing_below_one_is_rejected(gs):
    with pytest.raises(DomainError):
        V_of_y(gs, 0.99)
    # round-off below 1 is tolerated and evaluated at 1
    assert V_of_y(gs, 1.0 - 1e-13) == 0.0


def test_greenshields_assumptions_are_sharp(gs):
    report = verify_assumptions(gs, 1000)
    assert report.passed
    # V(y) = 1 - 1/y meets the growth bound with equality at sigma = 2
    assert abs(report.growth_margin) <= 1e-15
    # y^2 V'(y) = 1 identically, so the margin against M = 1 is zero
    assert abs(report.derivative_margin) <= 1e-15


def test_quadratic_assumptions():
    m = velocity.quadratic()
    report = verify_assumptions(m, 1000)
    assert report.passed
    # brute-force sampling of both bounds, independent of verify_assumptions
    y = np.linspace(1.0, 500.0, 200_001)
    V = 1.0 - 1.0 / y ** 2
    assert np.all(V - (1.0 - y ** (1.0 - 3.0)) >= -1e-15)
    dV = (V[2:] - V[:-2]) / (y[2:] - y[:-2])
    assert np.all(y[1:-1] ** 2 * dV <= 2.0 + 1e-6)


def test_wrong_constants_are_reported():
    bad = velocity.VelocityModel("gs-wrong", lambda r: 1.0 - r, lambda r: -1.0 + 0.0 * r,
                                 sigma=3.0, M=0.5)
    report = verify_assumptions(bad, 200)
    assert not report.growth_ok
    assert not report.derivative_ok
    assert not report.passed


def test_bad_boundary_and_monotonicity_are_reported():
    m = velocity.VelocityModel("odd", lambda r: 0.9 - 0.9 * r, lambda r: -0.9 + 0.0 * r,
                               sigma=2.0, M=1.0)
    assert not verify_assumptions(m, 100).boundary_ok


def test_verify_assumptions_grid_size():
    with pytest.raises(ValueError):
        verify_assumptions(velocity.greenshields(), 1)


def test_model_registration_checks():
    with pytest.raises(ValueError):
        velocity.VelocityModel("s", lambda r: 1.0 - r, lambda r: -1.0 + 0.0 * r, sigma=1.0, M=1.0)
    # f = rho (1 - rho)(1 - 4 rho(1-rho)) ... bimodal
    v = lambda r: (1.0 - r) * (1.0 - 3.5 * r * (1.0 - r))
    vp = lambda r: -(1.0 - 3.5 * r * (1.0 - r)) + (1.0 - r) * (-3.5 + 7.0 * r)
    with pytest.raises(ValueError, match="unimodal"):
        velocity.VelocityModel("bimodal", v, vp, sigma=2.0, M=10.0)


def test_flux_maximiser_and_wave_speed(model):
    rho = np.linspace(0, 1, 100_001)
    f = model.f(rho)
    assert model.rho_star == pytest.approx(rho[np.argmax(f)], abs=1e-5)
    df = np.gradient(f, rho)
    assert model.max_wave_speed == pytest.approx(np.abs(df).max(), rel=1e-3)


def test_get_model():
    assert velocity.get_model("quadratic").name == "quadratic"
    with pytest.raises(ValueError):
        velocity.get_model("idm")


unit = st.floats(0.0, 1.0)


@given(a=st.floats(1.0, 1e6), b=st.floats(1.0, 1e6))
def test_V_bounded_and_nondecreasing(a, b):
    lo, hi = min(a, b), max(a, b)
    for m in (velocity.greenshields(), velocity.quadratic()):
        Vlo, Vhi = V_of_y(m, lo), V_of_y(m, hi)
        assert 0.0 <= Vlo <= Vhi <= 1.0


@given(rho=unit)
def test_flux_is_rho_times_v(rho):
    for m in (velocity.greenshields(), velocity.quadratic()):
        assert flux(m, rho) == rho * v_of_rho(m, rho)


@given(rho=st.floats(1e-6, 1.0))
def test_spacing_and_density_forms_agree(rho):
    for m in (velocity.greenshields(), velocity.quadratic()):
        assert V_of_y(m, 1.0 / rho) == pytest.approx(v_of_rho(m, rho), abs=1e-12)
