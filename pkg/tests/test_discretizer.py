import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ftl2lwr import discretizer
from ftl2lwr.discretizer import InitialDensity, initial_positions, normalize


def test_normalize_examples():
    d = InitialDensity([0.0, 1.0], [1.0])
    assert normalize(d) is d
    half = normalize(InitialDensity([0.0, 1.0], [0.5]))
    np.testing.assert_allclose(half.breakpoints, [0.0, 2.0])
    np.testing.assert_allclose(half.values, [0.5])
    tall = normalize(InitialDensity([0.0, 2.0], [1.0]))
    np.testing.assert_allclose(tall.breakpoints, [0.0, 1.0])


def test_normalize_rejects_zero_mass():
    with pytest.raises(ValueError):
        normalize(InitialDensity([0.0, 1.0], [0.0]))


@pytest.mark.parametrize("bp,vals", [
    ([0.0, 1.0], [1.5]),
    ([0.0, 1.0], [-0.1]),
    ([1.0, 0.0], [0.5]),
    ([0.0, 1.0, 2.0], [0.5]),
])
def test_invalid_densities(bp, vals):
    with pytest.raises(ValueError):
        InitialDensity(bp, vals)


def test_block_positions():
    lay = initial_positions(discretizer.block(), 3)
    assert lay.ell == 0.25
    np.testing.assert_allclose(lay.positions, [0.25, 0.5, 0.75], atol=1e-15)
    np.testing.assert_allclose(lay.spacings, [1.0, 1.0], atol=1e-14)


def test_gap_takes_infimum():
    lay = initial_positions(discretizer.two_blocks(), 3)
    np.testing.assert_allclose(lay.positions, [0.25, 0.5, 1.25], atol=1e-15)


def test_half_density():
    lay = initial_positions(normalize(InitialDensity([0.0, 1.0], [0.5])), 3)
    np.testing.assert_allclose(lay.positions, [0.5, 1.0, 1.5], atol=1e-15)
    np.testing.assert_allclose(lay.spacings, [2.0, 2.0], atol=1e-14)


def test_preconditions():
    with pytest.raises(ValueError):
        initial_positions(discretizer.block(), 1)
    with pytest.raises(ValueError):
        initial_positions(InitialDensity([0.0, 1.0], [0.5]), 3)


def test_presets():
    assert discretizer.riemann(0.2, 0.8).mass == pytest.approx(1.0)
    r = discretizer.riemann(0.5, 0.5)
    assert r.mass == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(r.breakpoints, [-1.0, 0.0, 1.0])
    assert discretizer.from_spec({"preset": "two_blocks"}).mass == pytest.approx(1.0)
    d = discretizer.from_spec({"breakpoints": [0, 4], "values": [0.5]})
    np.testing.assert_allclose(d.breakpoints, [0.0, 2.0])
    with pytest.raises(ValueError):
        discretizer.from_spec({"preset": "ring"})


def test_total_variation_of_density():
    assert discretizer.block().total_variation == 2.0
    assert discretizer.riemann(0.2, 0.8).total_variation == pytest.approx(1.6)


@st.composite
def densities(draw):
    m = draw(st.integers(1, 8))
    widths = draw(st.lists(st.floats(0.05, 2.0), min_size=m, max_size=m))
    values = draw(st.lists(st.floats(0.0, 1.0), min_size=m, max_size=m))
    if sum(v * w for v, w in zip(values, widths)) < 1e-3:
        values[0] = 1.0
    x0 = draw(st.floats(-5.0, 5.0))
    bp = x0 + np.concatenate([[0.0], np.cumsum(widths)])
    return normalize(InitialDensity(bp, values))


@settings(max_examples=60, deadline=None)
@given(d=densities(), N=st.integers(2, 60))
def test_layout_invariants(d, N):
    lay = initial_positions(d, N)
    assert lay.positions.size == N and lay.spacings.size == N - 1
    assert np.all(np.diff(lay.positions) > 0)
    assert np.all(lay.spacings >= 1.0 - 1e-12)
    cell_mass = np.diff(d.cdf(lay.positions))
    np.testing.assert_allclose(cell_mass, lay.ell, atol=1e-12)
    np.testing.assert_allclose(d.cdf(lay.positions[0]), lay.ell, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(d=densities(), N=st.integers(2, 40))
def test_refinement_consistency(d, N):
    b = d.breakpoints
    mids = 0.5 * (b[:-1] + b[1:])
    fine = InitialDensity(np.sort(np.concatenate([b, mids])), np.repeat(d.values, 2))
    np.testing.assert_allclose(initial_positions(fine, N).positions,
                               initial_positions(d, N).positions, rtol=0, atol=1e-12)
