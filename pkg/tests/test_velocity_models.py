import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scalar_cascade.velocity_models import (
    Pierrehumbert,
    RandomBandFlow,
    Shear,
    Weight,
    ZeroFlow,
    divergence_residual,
    pierrehumbert,
    random_band_flow,
    shear_coefficients,
    weighted_l1,
    weighted_l1_coeffs,
)

times = st.floats(0, 50, allow_nan=False)


def test_shear_coefficients_are_half_amplitude():
    u = shear_coefficients(Shear(axis_out=0, amplitude=1.0, phase=0.0))
    # A sin(2 pi x2) e1 = A/(2i) e^{2 pi i x2} + c.c.
    assert u[0, 1, 2] == pytest.approx(1 / 2j)
    assert u[0, 1, 0] == pytest.approx(-1 / 2j)
    assert np.count_nonzero(u) == 2
    assert np.abs(u[0, 1, 2]) == pytest.approx(0.5)


@given(st.integers(0, 10**6), times)
def test_pierrehumbert_physical_matches_formula(seed, t):
    u = pierrehumbert(1.3, 1.0, seed)
    sh = u.shear(t)
    x = np.arange(8) / 8
    field = u.physical(t, 8)
    profile = 1.3 * np.sin(2 * np.pi * x + sh.phase)
    if sh.axis_out == 0:
        assert np.allclose(field[0], profile[None, :])
        assert np.allclose(field[1], 0)
    else:
        assert np.allclose(field[1], profile[:, None])
        assert np.allclose(field[0], 0)


def test_pierrehumbert_alternates_each_half_period():
    u = pierrehumbert(1.0, 2.0, seed=3)
    assert u.shear(0.0).axis_out == 0
    assert u.shear(0.999).axis_out == 0
    assert u.shear(1.0).axis_out == 1
    assert u.shear(2.0).axis_out == 0
    assert u.shear(0.3).phase == u.shear(0.7).phase
    assert u.shear(0.3).phase != u.shear(2.3).phase


def test_pierrehumbert_deterministic_per_seed():
    a, b, c = pierrehumbert(1, 1, 5), pierrehumbert(1, 1, 5), pierrehumbert(1, 1, 6)
    assert [a.phases(n) for n in range(5)] == [b.phases(n) for n in range(5)]
    assert a.phases(0) != c.phases(0)
    # phases do not depend on the order in which periods are queried
    d = pierrehumbert(1, 1, 5)
    assert d.phases(3) == a.phases(3)


def test_random_offset_lies_on_step_lattice():
    offs = {Pierrehumbert(1.0, 1.0, s, offset_steps=32).offset for s in range(200)}
    assert all(abs(o * 32 - round(o * 32)) < 1e-12 and 0 <= o < 1 for o in offs)
    assert len(offs) > 20


@given(st.integers(1, 4), st.floats(0, 3), st.integers(0, 10**6), times)
def test_random_band_flow_divergence_free_and_real(L, decay, seed, t):
    u = random_band_flow(L, decay, seed)
    c = u.coefficients(t)
    assert divergence_residual(c) < 1e-12
    assert np.allclose(c, np.conj(c[:, ::-1, ::-1]))
    assert np.all(c[:, L, L] == 0)
    k1, k2 = np.meshgrid(np.arange(-L, L + 1), np.arange(-L, L + 1), indexing="ij")
    assert np.all(c[:, np.hypot(k1, k2) > L] == 0)


def test_random_band_flow_continuous_in_time():
    u = random_band_flow(2, 1.0, seed=1)
    knot = u.knot_interval
    for n in (1, 5, 17):
        left = u.coefficients(n * knot - 1e-9)
        right = u.coefficients(n * knot)
        assert np.max(np.abs(left - right)) < 1e-6


def test_random_band_flow_variance_and_mean():
    # time average over a long path approaches the stationary moments
    u = RandomBandFlow(band_limit=2, spectrum_decay=1.0, seed=11, amplitude=2.0, knot_interval=0.25)
    ts = np.arange(4000) * 0.25
    energies = np.array([np.sum(np.abs(u.coefficients(t)) ** 2) for t in ts])
    assert energies.mean() == pytest.approx(4.0, rel=0.15)
    means = np.mean([u.mode_amplitudes(t) for t in ts], axis=0)
    assert np.max(np.abs(means)) < 0.1


def test_zero_flow():
    z = ZeroFlow()
    assert np.all(z.coefficients(1.0) == 0)
    assert weighted_l1(z, 0.0, Weight.indicator(1)) == 0.0


def test_weights():
    ind = Weight.indicator(1.0)
    assert ind(0.5) == 2.0 and math.isinf(ind(1.5))
    assert ind.inverse(1.5) == 0.0 and ind.inverse(1.0) == 0.5
    poly = Weight.polynomial(2)
    assert poly(0) == 2.0 and poly(1) == 8.0
    assert poly.inverse(0) == 0.5
    assert poly.inverse_integral() == pytest.approx(0.5)
    with pytest.raises(ValueError):
        Weight.indicator(0.4)
    with pytest.raises(ValueError):
        Weight.polynomial(65)
    with pytest.raises(ValueError):
        Weight("gaussian", 1.0)


@given(st.floats(0, 64), st.floats(0, 100), st.floats(0, 100))
def test_weights_are_increasing_and_at_least_one(q, s1, s2):
    w = Weight.polynomial(q)
    a, b = sorted((s1, s2))
    assert w(a) >= 1 and w(a) <= w(b)


@given(st.floats(0.1, 10), st.integers(0, 10**6), times)
def test_pierrehumbert_weighted_l1(A, seed, t):
    u = pierrehumbert(A, 1.0, seed)
    # two active modes at |k| = 1 with magnitude A/2 each
    assert weighted_l1(u, t, Weight.indicator(1)) == pytest.approx(2 * A)
    assert weighted_l1(u, t, Weight.polynomial(2)) == pytest.approx(8 * A)
    assert math.isinf(weighted_l1(u, t, Weight.indicator(0.5)))
