"""Time integration of the unforced advection-diffusion equation on the lattice.

Both schemes are Strang splittings ``D(dt/2) A(dt) D(dt/2)`` around an exact
diffusion multiplier.  They differ in the advective substep ``A``:

* ``split_step_galerkin`` integrates the truncated Galerkin advection ODE
  with classical RK4, products evaluated pseudo-spectrally;
* ``exact_shear_map`` applies the exact transport map of a steady sinusoidal
  shear (a phase multiplication in mixed Fourier/physical variables, i.e. a
  Bessel-coefficient band convolution in Fourier space).

The energy removed by every diffusion substep is accumulated exactly per
lattice site, which is what makes the discrete energy identity hold to
rounding plus integrator error of the advective substep.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as sfft
from scipy import special

from scalar_cascade.spectral_core import (
    FOUR_PI_SQ,
    TWO_PI,
    SpectralField,
    WaveGrid,
    hminus1_weights,
    l2_norm_sq,
    min_physical_size,
)
from scalar_cascade.velocity_models import Shear, VelocityModel

SCHEMES = ("split_step_galerkin", "exact_shear_map")
# 2 pi * CFL must stay inside RK4's imaginary-axis stability interval (2 sqrt 2).
_RK4_CFL = 2 * math.sqrt(2) / TWO_PI
TAIL_TOLERANCE = 1e-8
# fraction of N beyond which lattice mass counts as truncation tail
TAIL_RADIUS = 0.75


class TruncationError(RuntimeError):
    """The lattice no longer holds the solution: mass reached ``|k| >= 3N/4``."""


@dataclass(frozen=True)
class IntegratorSpec:
    scheme: str = "exact_shear_map"
    dt: float = 1.0 / 64
    dealias_pad: int | None = None
    cfl_limit: float = 0.5

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def check(self, grid: WaveGrid, u: VelocityModel) -> None:
        """Validate these settings against a grid and velocity before integrating."""
        if self.scheme == "split_step_galerkin":
            cfl = u.amplitude * self.dt * grid.max_mode
            limit = min(self.cfl_limit, _RK4_CFL)
            if cfl > limit:
                raise ValueError(f"advective CFL number A*dt*N = {cfl:.3g} exceeds {limit:.3g}")
            if self.dealias_pad is not None and self.dealias_pad < u.band_limit:
                raise ValueError("dealias_pad must be at least the velocity band limit")
        for interval in (u.switch_interval, u.knot_interval):
            if interval is not None:
                ratio = interval / self.dt
                if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                    raise ValueError(f"dt = {self.dt} must divide the velocity's switching interval {interval}")


class PseudoSpectralProduct:
    """Alias-free products of a lattice field with a band-limited velocity."""

    def __init__(self, grid: WaveGrid, band: int, size: int | None = None):
        need = min_physical_size(grid, band)
        size = sfft.next_fast_len(need) if size is None else size
        if size < need:
            raise ValueError(f"padding inadequate: {size} points < {need} needed for band {band}")
        self.grid, self.band, self.size = grid, band, size
        n = grid.max_mode
        self._rows = grid.modes % size
        self._k1 = grid.k1.astype(float)
        self._k2 = grid.k2.astype(float)
        self._n = n
        m = np.arange(-band, band + 1)
        self._basis = np.exp(2j * np.pi * np.outer(np.arange(size) / size, m))

    def velocity(self, u_coeffs: np.ndarray) -> np.ndarray:
        """Physical samples of a band-limited vector field, shape ``(2, P, P)``."""
        L = (u_coeffs.shape[-1] - 1) // 2
        if L > self.band:
            raise ValueError(f"velocity band {L} exceeds the padding band {self.band}")
        if L < self.band:
            pad = self.band - L
            u_coeffs = np.pad(u_coeffs, ((0, 0), (pad, pad), (pad, pad)))
        E = self._basis
        return np.real(E @ u_coeffs @ E.T)

    def to_physical(self, a: np.ndarray) -> np.ndarray:
        n, P = self._n, self.size
        half = np.zeros((P, P // 2 + 1), dtype=complex)
        half[self._rows, : n + 1] = a[:, n:]
        return sfft.irfft2(half, s=(P, P), norm="forward")

    def to_lattice(self, x: np.ndarray) -> np.ndarray:
        n = self._n
        spec = sfft.rfft2(x, norm="forward")
        out = np.empty(self.grid.shape, dtype=complex)
        out[:, n:] = spec[self._rows, : n + 1]
        out[:, :n] = np.conj(out[::-1, :n:-1])
        return out

    def advection(self, a: np.ndarray, u_phys: np.ndarray) -> np.ndarray:
        """``-2 pi i k . (u phi)^(k)``, i.e. minus the transport term, on the lattice."""
        phi = self.to_physical(a)
        f1 = self.to_lattice(u_phys[0] * phi)
        f2 = self.to_lattice(u_phys[1] * phi)
        return -2j * np.pi * (self._k1 * f1 + self._k2 * f2)


def diffusion_rates(grid: WaveGrid, nu: float) -> np.ndarray:
    return FOUR_PI_SQ * nu * grid.modulus_sq


def galerkin_rhs(phi: SpectralField, u_coeffs: np.ndarray, nu: float, *, size: int | None = None) -> SpectralField:
    """Time derivative of the truncated Galerkin system at state ``phi``.

    ``d phihat/dt (k) = -4 pi^2 nu |k|^2 phihat(k) - 2 pi i sum_j (k . uhat(k - j)) phihat(j)``
    for ``k`` on the lattice, with the convolution evaluated pseudo-spectrally.
    """
    band = (u_coeffs.shape[-1] - 1) // 2
    op = PseudoSpectralProduct(phi.grid, band, size)
    adv = op.advection(phi.amplitudes, op.velocity(u_coeffs))
    return SpectralField(phi.grid, adv - diffusion_rates(phi.grid, nu) * phi.amplitudes)


def bessel_band(z_max: float, eps: float = 1e-18) -> int:
    """Number of Bessel side bands needed so ``|J_n(z)| < eps`` for ``|n| > band``, ``z <= z_max``."""
    n = np.arange(0, int(z_max + 40 + 4 * z_max ** (1 / 3)) + 1)
    big = np.nonzero(np.abs(special.jv(n, z_max)) >= eps)[0]
    return int(big[-1]) + 1 if big.size else 0


class ShearMap:
    """Exact transport by a steady sine shear for a fixed time ``s``."""

    def __init__(self, grid: WaveGrid, s: float, amplitude: float):
        self.grid, self.s, self.amplitude = grid, s, amplitude
        z_max = TWO_PI * grid.max_mode * amplitude * s
        self.band = bessel_band(z_max)
        self.size = sfft.next_fast_len(min_physical_size(grid, self.band))
        self._idx = grid.modes % self.size
        self._x = np.arange(self.size) / self.size
        self._key: tuple | None = None
        self._phase: np.ndarray | None = None

    def _phases(self, sh: Shear) -> np.ndarray:
        key = (sh.amplitude, sh.phase)
        if key != self._key:
            if sh.amplitude > self.amplitude * (1 + 1e-12):
                raise ValueError("shear amplitude exceeds the amplitude this map was sized for")
            disp = self.s * sh.amplitude * np.sin(TWO_PI * self._x + sh.phase)
            self._phase = np.exp(-2j * np.pi * np.outer(self.grid.modes, disp))
            self._key = key
        return self._phase

    def __call__(self, a: np.ndarray, sh: Shear) -> np.ndarray:
        phase = self._phases(sh)
        P, idx = self.size, self._idx
        if sh.axis_out == 0:
            # transport along x1, shear varies with x2: rows are k1, transform axis 1
            buf = np.zeros((a.shape[0], P), dtype=complex)
            buf[:, idx] = a
            c = sfft.ifft(buf, axis=1, norm="forward") * phase
            return sfft.fft(c, axis=1, norm="forward")[:, idx]
        buf = np.zeros((P, a.shape[1]), dtype=complex)
        buf[idx, :] = a
        c = sfft.ifft(buf, axis=0, norm="forward") * phase.T
        return sfft.fft(c, axis=0, norm="forward")[idx, :]


def shear_map_oracle(a: np.ndarray, grid: WaveGrid, sh: Shear, s: float) -> np.ndarray:
    """Direct Bessel-series evaluation of the exact shear map (test oracle)."""
    n_max = bessel_band(TWO_PI * grid.max_mode * sh.amplitude * s)
    out = np.zeros_like(a)
    N = grid.max_mode
    src = a if sh.axis_out == 0 else a.T
    res = out if sh.axis_out == 0 else out.T
    for row, k in enumerate(grid.modes):
        z = TWO_PI * k * s * sh.amplitude
        for n in range(-n_max, n_max + 1):
            c = special.jv(n, z) * np.exp(-1j * n * sh.phase)
            # output mode m receives input mode m + n
            lo, hi = max(-N, -N - n), min(N, N - n)
            if lo > hi:
                continue
            res[row, lo + N: hi + N + 1] += c * src[row, lo + n + N: hi + n + N + 1]
    return out


class Stepper:
    """One Strang step of either scheme for a fixed grid, velocity and diffusivity."""

    def __init__(self, grid: WaveGrid, u: VelocityModel, nu: float, spec: IntegratorSpec):
        spec.check(grid, u)
        self.grid, self.u, self.nu, self.spec = grid, u, nu, spec
        dt = spec.dt
        rates = diffusion_rates(grid, nu)
        self.half_decay = np.exp(-rates * dt / 2)
        self.half_loss = -np.expm1(-rates * dt)  # 1 - half_decay**2
        if spec.scheme == "exact_shear_map":
            self._shear_map = ShearMap(grid, dt, max(u.amplitude, 1e-300))
        else:
            band = u.band_limit if spec.dealias_pad is None else spec.dealias_pad
            self._product = PseudoSpectralProduct(grid, band)
            self._u_cache: dict[float, np.ndarray] = {}

    def _u_phys(self, t: float) -> np.ndarray:
        hit = self._u_cache.get(t)
        if hit is None:
            if len(self._u_cache) > 8:
                self._u_cache.clear()
            hit = self._product.velocity(self.u.coefficients(t))
            self._u_cache[t] = hit
        return hit

    def advect(self, a: np.ndarray, t: float) -> np.ndarray:
        dt = self.spec.dt
        if self.u.amplitude == 0:
            return a
        if self.spec.scheme == "exact_shear_map":
            sh = self.u.shear(t + dt / 2)
            if sh is None:
                raise ValueError("exact_shear_map requires a pure-shear velocity")
            return self._shear_map(a, sh)
        op = self._product
        if self.u.switch_interval is not None:
            um = self._u_phys(t + dt / 2)
            u0 = u1 = um
        else:
            u0, um, u1 = self._u_phys(t), self._u_phys(t + dt / 2), self._u_phys(t + dt)
        k1 = op.advection(a, u0)
        k2 = op.advection(a + 0.5 * dt * k1, um)
        k3 = op.advection(a + 0.5 * dt * k2, um)
        k4 = op.advection(a + dt * k3, u1)
        return a + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

    def __call__(self, a: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Advance amplitudes from ``t`` to ``t + dt``; also return the energy dissipated per site."""
        lost = np.abs(a) ** 2 * self.half_loss
        a = self.advect(a * self.half_decay, t)
        lost += np.abs(a) ** 2 * self.half_loss
        return a * self.half_decay, lost


def step(phi: SpectralField, u: VelocityModel, nu: float, t: float, dt: float,
         spec: IntegratorSpec) -> SpectralField:
    """One time step of length ``dt`` (overriding ``spec.dt``)."""
    if dt != spec.dt:
        spec = IntegratorSpec(scheme=spec.scheme, dt=dt, dealias_pad=spec.dealias_pad, cfl_limit=spec.cfl_limit)
    a, _ = Stepper(phi.grid, u, nu, spec)(phi.amplitudes, t)
    return SpectralField(phi.grid, a)


def n_steps(T: float, dt: float) -> int:
    n = round(T / dt)
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"horizon T = {T} is not a positive multiple of dt = {dt}")
    return n


@dataclass
class TrajectoryRecord:
    """Per-step scalar diagnostics and time-integrated shell measures of one run.

    Shell arrays are aligned with ``grid.shell_radii``.  ``mass_integral`` is the
    trapezoid-in-time integral of the instantaneous mass measure;
    ``mass_integral_left`` the left Riemann sum (matching the Euler-Maruyama
    forcing of the forced oracle).  ``dissipated`` is the exact energy removed
    by diffusion from each shell over ``[0, T]``.  Shell snapshots are kept
    every ``sample_every`` steps.
    """

    max_mode: int
    nu: float
    dt: float
    T: float
    times: np.ndarray
    l2: np.ndarray
    grad: np.ndarray
    hminus1: np.ndarray
    tail: np.ndarray
    mass_integral: np.ndarray
    mass_integral_left: np.ndarray
    dissipated: np.ndarray
    sample_times: np.ndarray
    sample_mass: np.ndarray
    sample_dissipation: np.ndarray
    final: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def grid(self) -> WaveGrid:
        return WaveGrid(self.max_mode)

    @property
    def energy_residual(self) -> float:
        """``||phi_T||^2 + 2 nu int ||grad phi||^2 dt - ||g||^2``."""
        return float(self.l2[-1] + self.dissipated.sum() - self.l2[0])


def _check_initial(g: SpectralField, atol: float = 1e-10) -> None:
    if abs(g.mean) > atol:
        raise ValueError("initial datum must be mean free")
    if abs(l2_norm_sq(g) - 1.0) > atol:
        raise ValueError(f"initial datum must have unit L2 norm (got {l2_norm_sq(g):.12g})")


StepHook = Callable[[int, float, np.ndarray], None]


def run_phi(g: SpectralField, u: VelocityModel, nu: float, T: float, spec: IntegratorSpec, *,
            sample_every: int | None = None, keep_final: bool = True, on_step: StepHook | None = None,
            tail_tolerance: float | None = TAIL_TOLERANCE, t0: float = 0.0) -> TrajectoryRecord:
    """Integrate the unforced equation from ``g`` over ``[0, T]``.

    ``on_step(n, t, amplitudes)`` is called on every recorded state including
    the initial one.  A :class:`TruncationError` is raised once the mass with
    ``|k| >= 3N/4`` exceeds ``tail_tolerance`` (relative to ``||g||^2``).
    """
    _check_initial(g)
    grid = g.grid
    dt = spec.dt
    steps = n_steps(T, dt)
    sample_every = sample_every or max(1, round(1.0 / dt))
    stepper = Stepper(grid, u, nu, spec)

    w = np.stack([
        np.ones(grid.shape),
        FOUR_PI_SQ * grid.modulus_sq,
        hminus1_weights(grid),
        (grid.modulus_table >= TAIL_RADIUS * grid.max_mode).astype(float),
    ]).reshape(4, -1)
    diag = np.empty((steps + 1, 4))
    times = t0 + dt * np.arange(steps + 1)
    sample_times, sample_mass, sample_diss = [], [], []
    diss_weight = 2 * nu * FOUR_PI_SQ * grid.modulus_sq

    a = g.amplitudes.copy()
    p = np.abs(a) ** 2
    left = np.zeros(grid.shape)
    lost = np.zeros(grid.shape)
    p0 = p
    for n in range(steps + 1):
        diag[n] = w @ p.ravel()
        if tail_tolerance is not None and diag[n, 3] > tail_tolerance * diag[0, 0]:
            raise TruncationError(
                f"mass {diag[n, 3]:.3e} at |k| >= 3N/4 exceeds tolerance at t = {times[n]:.4g}; refine the grid")
        if n % sample_every == 0:
            sample_times.append(times[n])
            sample_mass.append(grid.shell_sum(p))
            sample_diss.append(grid.shell_sum(diss_weight * p))
        if on_step is not None:
            on_step(n, times[n], a)
        if n == steps:
            break
        left += p
        a, dl = stepper(a, times[n])
        lost += dl
        p = np.abs(a) ** 2
    left *= dt
    trap = left + 0.5 * dt * (p - p0)
    return TrajectoryRecord(
        max_mode=grid.max_mode, nu=nu, dt=dt, T=T, times=times,
        l2=diag[:, 0], grad=diag[:, 1], hminus1=diag[:, 2], tail=diag[:, 3],
        mass_integral=grid.shell_sum(trap), mass_integral_left=grid.shell_sum(left),
        dissipated=grid.shell_sum(lost),
        sample_times=np.array(sample_times), sample_mass=np.array(sample_mass),
        sample_dissipation=np.array(sample_diss),
        final=a if keep_final else None,
    )


def run_forced_oracle(g: SpectralField, u: VelocityModel, nu: float, T: float, spec: IntegratorSpec,
                      noise_seed: int, *, initial: SpectralField | None = None, forcing: bool = True,
                      period: float | None = None) -> SpectralField:
    """Euler-Maruyama in the noise: ``psi_{n+1} = step(psi_n) + sqrt(dt) xi_n g``.

    ``period`` (when given) must divide ``T``, aligning the horizon with the
    velocity's stationarity period.
    """
    if period is not None:
        ratio = T / period
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("T must be an integer multiple of the velocity period")
    grid = g.grid
    dt = spec.dt
    steps = n_steps(T, dt)
    stepper = Stepper(grid, u, nu, spec)
    rng = np.random.default_rng(noise_seed)
    a = grid.zeros() if initial is None else initial.amplitudes.copy()
    kick = math.sqrt(dt) * g.amplitudes
    for n in range(steps):
        a, _ = stepper(a, n * dt)
        if forcing:
            a = a + rng.standard_normal() * kick
    return SpectralField(grid, a)
