import numpy as np
import pytest
from hypothesis import given, strategies as st

from scalar_cascade.spectral_core import (
    FOUR_PI_SQ,
    SpectralField,
    WaveGrid,
    grad_norm_sq,
    hminus1_norm_sq,
    inner,
    l2_norm_sq,
    project_high,
    project_low,
    to_physical,
    to_spectral,
)

seeds = st.integers(0, 2**32 - 1)
modes = st.integers(1, 12)


def random_field(N, seed, band=None):
    return SpectralField.random(WaveGrid(N), np.random.default_rng(seed), band=band)


def test_grid_layout():
    g = WaveGrid(3)
    assert g.shape == (7, 7)
    assert g.k1[0, 5] == -3 and g.k2[0, 5] == 2
    assert g.modulus_table[g.index_of((3, 3))] == pytest.approx(np.sqrt(18))
    assert g.shell_radii[0] == 0.0
    assert np.all(np.diff(g.shell_radii) > 0)
    with pytest.raises(IndexError):
        g.index_of((4, 0))
    with pytest.raises(ValueError):
        WaveGrid(4, dim=3)


def test_single_cosine_is_unit():
    grid = WaveGrid(4)
    g = SpectralField.from_modes(grid, {(1, 0): 1 / np.sqrt(2)})
    assert l2_norm_sq(g) == pytest.approx(1.0)
    assert grad_norm_sq(g) == pytest.approx(FOUR_PI_SQ)
    assert hminus1_norm_sq(g) == pytest.approx(1 / FOUR_PI_SQ)
    x = np.arange(9) / 9
    assert np.allclose(to_physical(g, 9)[:, 0], np.sqrt(2) * np.cos(2 * np.pi * x))


def test_zero_mode_rejected():
    with pytest.raises(ValueError):
        SpectralField.from_modes(WaveGrid(2), {(0, 0): 1.0})


def test_hminus1_needs_mean_free():
    a = WaveGrid(2).zeros()
    a[2, 2] = 1.0
    with pytest.raises(ValueError):
        hminus1_norm_sq(SpectralField(WaveGrid(2), a))


@given(modes, seeds)
def test_parseval(N, seed):
    f = random_field(N, seed)
    samples = to_physical(f)
    assert np.mean(samples**2) == pytest.approx(l2_norm_sq(f), rel=1e-12)
    assert abs(np.mean(samples)) < 1e-13


@given(modes, seeds, st.integers(0, 8))
def test_round_trip(N, seed, extra):
    f = random_field(N, seed)
    back = to_spectral(to_physical(f, 2 * N + 1 + extra), f.grid)
    assert np.allclose(back.amplitudes, f.amplitudes, atol=1e-13)


@given(modes, seeds)
def test_random_fields_are_real_and_mean_free(N, seed):
    f = random_field(N, seed)
    assert f.is_hermitian()
    assert f.mean == 0
    assert l2_norm_sq(f) == pytest.approx(1.0)
    assert np.max(np.abs(np.fft.ifft2(np.fft.ifftshift(f.amplitudes)).imag)) < 1e-13


@given(modes, seeds, st.floats(0, 20))
def test_projectors_split_the_field(N, seed, r):
    f = random_field(N, seed)
    hi, lo = project_high(f, r), project_low(f, r)
    assert np.allclose((hi + lo).amplitudes, f.amplitudes)
    assert abs(inner(hi, lo)) < 1e-14
    assert l2_norm_sq(hi) + l2_norm_sq(lo) == pytest.approx(l2_norm_sq(f), rel=1e-12)


@given(modes, seeds, st.floats(0, 10), st.floats(0, 10))
def test_high_projection_monotone(N, seed, r1, r2):
    f = random_field(N, seed)
    a, b = sorted((r1, r2))
    assert l2_norm_sq(project_high(f, b)) <= l2_norm_sq(project_high(f, a)) + 1e-15


def test_projection_radius_must_be_nonnegative():
    f = random_field(3, 0)
    with pytest.raises(ValueError):
        project_high(f, -1)
    with pytest.raises(ValueError):
        project_low(f, -0.5)


def test_norm_ordering_for_mean_free_fields(rng):
    # |k| >= 1 gives  4 pi^2 H^-1 <= L2 <= grad / (4 pi^2)
    f = SpectralField.random(WaveGrid(6), rng)
    assert FOUR_PI_SQ * hminus1_norm_sq(f) <= l2_norm_sq(f) <= grad_norm_sq(f) / FOUR_PI_SQ


def test_undersized_physical_grid_rejected():
    f = random_field(4, 1)
    with pytest.raises(ValueError):
        to_physical(f, 8)
    with pytest.raises(ValueError):
        to_physical(f, 10, band=1)


def test_shell_sum_groups_equal_moduli():
    grid = WaveGrid(3)
    f = SpectralField.from_modes(grid, {(1, 0): 0.5, (0, 1): 0.5})
    shells = grid.shell_sum(np.abs(f.amplitudes) ** 2)
    assert shells[grid.shell_radii == 1.0] == pytest.approx(1.0)
    assert shells.sum() == pytest.approx(1.0)
