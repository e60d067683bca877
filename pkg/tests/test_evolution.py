import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import trapezoid

from oracles import galerkin_rhs_direct
from scalar_cascade.evolution import (
    IntegratorSpec,
    PseudoSpectralProduct,
    ShearMap,
    Stepper,
    TruncationError,
    galerkin_rhs,
    n_steps,
    run_forced_oracle,
    run_phi,
    shear_map_oracle,
    step,
)
from scalar_cascade.spectral_core import FOUR_PI_SQ, SpectralField, WaveGrid, l2_norm_sq
from scalar_cascade.velocity_models import (
    Shear,
    ZeroFlow,
    pierrehumbert,
    random_band_flow,
    shear_coefficients,
)

seeds = st.integers(0, 2**32 - 1)


def cosine(N, k=(1, 0)):
    return SpectralField.from_modes(WaveGrid(N), {k: 1 / math.sqrt(2)})


def test_galerkin_rhs_matches_direct_sum():
    rng = np.random.default_rng(4)
    for trial in range(5):
        phi = SpectralField.random(WaveGrid(8), rng)
        u = random_band_flow(2, 1.0, trial).coefficients(0.4)
        got = galerkin_rhs(phi, u, 1e-2).amplitudes
        assert np.max(np.abs(got - galerkin_rhs_direct(phi.amplitudes, u, 1e-2, 8))) < 1e-12


def test_galerkin_rhs_heat_case():
    phi = SpectralField.random(WaveGrid(6), np.random.default_rng(0))
    got = galerkin_rhs(phi, np.zeros((2, 3, 3), complex), 0.3).amplitudes
    assert np.allclose(got, -FOUR_PI_SQ * 0.3 * phi.grid.modulus_sq * phi.amplitudes, rtol=0, atol=1e-13)


def test_galerkin_rhs_single_mode_under_shear():
    grid = WaveGrid(4)
    phi = SpectralField.from_modes(grid, {(1, 0): 0.5})
    u = shear_coefficients(Shear(axis_out=0, amplitude=1.0, phase=0.3))
    rhs = galerkin_rhs(phi, u, 0.0).amplitudes
    support = {tuple(k) for k in np.argwhere(np.abs(rhs) > 1e-14) - 4}
    assert support == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
    for k in [(1, 1), (1, -1)]:
        m = (k[0] - 1, k[1])
        ku = k[0] * u[0, m[0] + 1, m[1] + 1] + k[1] * u[1, m[0] + 1, m[1] + 1]
        assert rhs[grid.index_of(k)] == pytest.approx(-2j * np.pi * ku * 0.5)


@given(seeds, st.integers(1, 3))
def test_advection_is_energy_neutral(seed, L):
    rng = np.random.default_rng(seed)
    N = 8
    phi = SpectralField.random(WaveGrid(N), rng, band=N - L)
    u = random_band_flow(L, 1.0, seed).coefficients(1.0)
    rhs = galerkin_rhs(phi, u, 0.0)
    assert abs(np.real(np.vdot(phi.amplitudes, rhs.amplitudes))) < 1e-12


@given(seeds)
def test_truncated_advection_is_skew_even_at_the_boundary(seed):
    # exact skew-symmetry of the truncated system, not just of its interior
    phi = SpectralField.random(WaveGrid(6), np.random.default_rng(seed))
    u = random_band_flow(2, 0.5, seed).coefficients(0.0)
    assert abs(np.real(np.vdot(phi.amplitudes, galerkin_rhs(phi, u, 0.0).amplitudes))) < 1e-12


def test_inadequate_padding_rejected():
    with pytest.raises(ValueError):
        PseudoSpectralProduct(WaveGrid(8), 2, size=18)
    with pytest.raises(ValueError):
        galerkin_rhs(cosine(4), shear_coefficients(Shear(0, 1.0, 0.0)), 0.0, size=9)


@given(st.floats(0.01, 2.0), st.floats(0, 2 * np.pi), st.integers(0, 1), seeds)
def test_shear_map_matches_bessel_series(s, phase, axis, seed):
    grid = WaveGrid(6)
    a = SpectralField.random(grid, np.random.default_rng(seed)).amplitudes
    sh = Shear(axis_out=axis, amplitude=1.0, phase=phase)
    got = ShearMap(grid, s, 1.0)(a, sh)
    assert np.max(np.abs(got - shear_map_oracle(a, grid, sh, s))) < 1e-12


def test_shear_map_transports_physical_samples():
    # phi(x) -> phi(x1 - s A sin(2 pi x2 + theta), x2) for a low mode, checked pointwise
    N, s, A, th = 40, 0.3, 1.0, 0.7
    grid = WaveGrid(N)
    g = SpectralField.from_modes(grid, {(1, 0): 0.5})
    out = ShearMap(grid, s, A)(g.amplitudes, Shear(0, A, th))
    x = np.arange(2 * N + 1) / (2 * N + 1)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    want = np.cos(2 * np.pi * (X1 - s * A * np.sin(2 * np.pi * X2 + th)))
    got = np.fft.ifft2(np.fft.ifftshift(out), norm="forward").real
    assert np.max(np.abs(got - want)) < 1e-12


@pytest.mark.parametrize("scheme", ["exact_shear_map", "split_step_galerkin"])
def test_heat_solution_exact(scheme):
    grid = WaveGrid(8)
    g = SpectralField.random(grid, np.random.default_rng(1))
    nu, T = 2e-3, 2.0
    rec = run_phi(g, ZeroFlow(), nu, T, IntegratorSpec(scheme=scheme, dt=1 / 16), tail_tolerance=None)
    want = np.sum(np.exp(-2 * FOUR_PI_SQ * nu * grid.modulus_sq * T) * np.abs(g.amplitudes) ** 2)
    assert rec.l2[-1] == pytest.approx(want, rel=1e-12)
    assert abs(rec.energy_residual) < 1e-12


def test_single_mode_energy_identity_exact():
    rec = run_phi(cosine(16), ZeroFlow(), 1e-3, 10, IntegratorSpec(dt=1 / 32))
    assert abs(rec.energy_residual) < 1e-12
    assert rec.l2[-1] == pytest.approx(math.exp(-8 * math.pi**2 * 1e-3 * 10), rel=1e-12)


def test_diffusion_never_amplifies_and_fixes_mean():
    grid = WaveGrid(8)
    a = SpectralField.random(grid, np.random.default_rng(2)).amplitudes
    a[8, 8] = 0.7
    st_ = Stepper(grid, ZeroFlow(), 0.05, IntegratorSpec(dt=0.1))
    b, lost = st_(a, 0.0)
    assert np.all(np.abs(b) <= np.abs(a) + 1e-16)
    assert b[8, 8] == 0.7
    assert np.all(lost >= 0)


@pytest.mark.parametrize("scheme,dt", [("exact_shear_map", 1 / 16), ("split_step_galerkin", 1 / 1024)])
def test_inviscid_transport_is_isometry(scheme, dt):
    # one full period; the lattice is wide enough that nothing reaches its edge
    grid = WaveGrid(64)
    g = SpectralField.random(grid, np.random.default_rng(3), band=1)
    u = pierrehumbert(1.0, 1.0, 9)
    rec = run_phi(g, u, 0.0, 1.0, IntegratorSpec(scheme=scheme, dt=dt), tail_tolerance=None)
    assert rec.tail[-1] < 1e-14
    assert abs(rec.l2[-1] - 1.0) < 1e-10
    assert abs(rec.final[64, 64]) == 0.0
    assert SpectralField(grid, rec.final).is_hermitian(1e-14)


def test_richardson_and_scheme_cross_validation():
    g = cosine(64)
    u = pierrehumbert(1.0, 1.0, 3)
    final = {}
    for scheme, dt in [("exact_shear_map", 1 / 128), ("exact_shear_map", 1 / 256), ("exact_shear_map", 1 / 512),
                       ("split_step_galerkin", 1 / 512)]:
        final[scheme, dt] = run_phi(g, u, 1e-3, 5, IntegratorSpec(scheme=scheme, dt=dt)).final
    diff = lambda a, b: math.sqrt(np.sum(np.abs(final[a] - final[b]) ** 2))
    coarse = diff(("exact_shear_map", 1 / 128), ("exact_shear_map", 1 / 256))
    fine = diff(("exact_shear_map", 1 / 256), ("exact_shear_map", 1 / 512))
    assert fine <= 1e-6
    assert coarse / fine == pytest.approx(4, rel=0.15)  # second order
    assert diff(("split_step_galerkin", 1 / 512), ("exact_shear_map", 1 / 512)) <= 1e-4


def test_cfl_enforced():
    with pytest.raises(ValueError):
        Stepper(WaveGrid(64), pierrehumbert(1.0, 1.0, 0), 0.0, IntegratorSpec(scheme="split_step_galerkin", dt=1 / 64))


def test_exact_shear_map_rejects_non_shear_flow():
    st_ = Stepper(WaveGrid(8), random_band_flow(1, 1.0, 0), 0.0, IntegratorSpec(dt=1 / 16))
    with pytest.raises(ValueError):
        st_(cosine(8).amplitudes, 0.0)


def test_dt_must_divide_switching():
    with pytest.raises(ValueError):
        Stepper(WaveGrid(8), pierrehumbert(1.0, 1.0, 0), 0.0, IntegratorSpec(dt=0.3))


def test_unnormalised_initial_datum_rejected():
    g = cosine(8) * 2.0
    with pytest.raises(ValueError):
        run_phi(g, ZeroFlow(), 1e-3, 1.0, IntegratorSpec(dt=1 / 16))


def test_truncation_monitor_aborts():
    g = cosine(8)
    with pytest.raises(TruncationError):
        run_phi(g, pierrehumbert(1.0, 1.0, 0), 1e-5, 4.0, IntegratorSpec(dt=1 / 16))


def test_record_shapes_and_monotone_times():
    rec = run_phi(cosine(32), pierrehumbert(1.0, 1.0, 0), 4e-3, 2.0, IntegratorSpec(dt=1 / 32))
    assert rec.times.size == n_steps(2.0, 1 / 32) + 1
    assert np.all(np.diff(rec.times) > 0)
    assert np.all(rec.mass_integral >= 0) and np.all(rec.dissipated >= 0)
    assert list(rec.sample_times) == [0.0, 1.0, 2.0]
    assert rec.mass_integral.sum() == pytest.approx(trapezoid(rec.l2, rec.times), rel=1e-12)


def test_step_matches_stepper():
    g = cosine(16)
    u = pierrehumbert(1.0, 1.0, 2)
    one = step(g, u, 1e-3, 0.0, 1 / 32, IntegratorSpec())
    rec = run_phi(g, u, 1e-3, 1 / 32, IntegratorSpec(dt=1 / 32))
    assert np.allclose(one.amplitudes, rec.final, rtol=0, atol=0)


def test_forced_oracle_without_forcing_is_unforced_run():
    g = cosine(32)
    u = pierrehumbert(1.0, 1.0, 2)
    spec = IntegratorSpec(dt=1 / 32)
    rec = run_phi(g, u, 4e-3, 2.0, spec)
    psi = run_forced_oracle(g, u, 4e-3, 2.0, spec, noise_seed=0, initial=g, forcing=False)
    assert np.array_equal(psi.amplitudes, rec.final)


def test_forced_oracle_ou_variance():
    # u = 0: each realization is a scalar OU amplitude; E |psi_T|^2 on |k|=1 is the
    # discrete sum dt sum_n exp(-lam t_n), within Monte Carlo error of the closed form
    g = cosine(8)
    nu, T, dt, M = 1e-2, 4.0, 1 / 16, 400
    lam = 8 * math.pi**2 * nu
    vals = np.array([l2_norm_sq(run_forced_oracle(g, ZeroFlow(), nu, T, IntegratorSpec(dt=dt), noise_seed=s))
                     for s in range(M)])
    closed = (1 - math.exp(-lam * T)) / lam
    assert abs(vals.mean() - closed) < 3 * vals.std(ddof=1) / math.sqrt(M)
    discrete = dt * sum(math.exp(-lam * n * dt) for n in range(round(T / dt)))
    assert discrete == pytest.approx(closed, rel=0.03)


def test_forced_oracle_period_alignment():
    with pytest.raises(ValueError):
        run_forced_oracle(cosine(8), ZeroFlow(), 1e-2, 1.5, IntegratorSpec(dt=1 / 16), 0, period=1.0)
