"""Band-limited, divergence-free random velocities and weighted l1 norms.

Coefficients are returned as a complex array of shape ``(2, 2L + 1, 2L + 1)``
in centred layout (index ``i`` along an axis is wavenumber ``i - L``), the
leading axis holding the two vector components of ``uhat(k)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft

from scalar_cascade.spectral_core import WaveGrid, embed

_MAX_POLYNOMIAL_ORDER = 64


class Shear(NamedTuple):
    """A steady sinusoidal shear ``A sin(2 pi x[axis_in] + phase)`` along ``axis_out``."""

    axis_out: int
    amplitude: float
    phase: float

    @property
    def axis_in(self) -> int:
        return 1 - self.axis_out


def band_wavevectors(band_limit: int) -> tuple[np.ndarray, np.ndarray]:
    m = np.arange(-band_limit, band_limit + 1)
    return np.meshgrid(m, m, indexing="ij")


class VelocityModel:
    """Base class; subclasses implement :meth:`coefficients`.

    ``switch_interval`` is set by piecewise-constant-in-time models: the field
    is constant on each ``[n s, (n + 1) s)``.  ``knot_interval`` marks models that
    are smooth between knots ``n s``; steppers align to either.
    """

    band_limit: int
    amplitude: float
    switch_interval: float | None = None
    knot_interval: float | None = None

    def coefficients(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def shear(self, t: float) -> Shear | None:
        """The active shear on a neighbourhood of ``t``, if the flow is a pure shear."""
        return None

    def physical(self, t: float, size: int) -> np.ndarray:
        """Velocity samples, shape ``(2, size, size)``, on ``x = n / size``."""
        grid = WaveGrid(self.band_limit)
        return sfft.ifft2(embed(grid, self.coefficients(t), size), norm="forward").real


@dataclass(eq=False)
class Pierrehumbert(VelocityModel):
    """Alternating sine shears with phases redrawn every period.

    In period ``n`` the flow is ``(A sin(2 pi x2 + theta2_n), 0)`` for the first
    half and ``(0, A sin(2 pi x1 + theta1_n))`` for the second.  With
    ``offset_steps > 0`` the clock is shifted by a uniform random multiple of
    ``period / offset_steps``, which makes the law invariant under those shifts.
    """

    amplitude: float
    period: float
    seed: int
    offset_steps: int = 0
    band_limit: int = field(default=1, init=False)

    def __post_init__(self):
        if self.amplitude <= 0 or self.period <= 0:
            raise ValueError("amplitude and period must be positive")
        self.switch_interval = self.period / 2
        self._cache: dict[int, tuple[float, float]] = {}
        if self.offset_steps > 0:
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(0,)))
            self.offset = self.period * int(rng.integers(self.offset_steps)) / self.offset_steps
        else:
            self.offset = 0.0

    def phases(self, n: int) -> tuple[float, float]:
        """``(theta2_n, theta1_n)`` for period ``n``."""
        if n not in self._cache:
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(1, n)))
            th = rng.uniform(0.0, 2 * np.pi, size=2)
            self._cache[n] = (float(th[0]), float(th[1]))
        return self._cache[n]

    def shear(self, t: float) -> Shear:
        s = (t + self.offset) / self.period
        n = math.floor(s + 1e-12)
        frac = s - n
        theta2, theta1 = self.phases(n)
        if frac < 0.5 - 1e-12:
            return Shear(axis_out=0, amplitude=self.amplitude, phase=theta2)
        return Shear(axis_out=1, amplitude=self.amplitude, phase=theta1)

    def coefficients(self, t: float) -> np.ndarray:
        return shear_coefficients(self.shear(t))


def shear_coefficients(sh: Shear) -> np.ndarray:
    """Fourier coefficients of ``A sin(2 pi x[axis_in] + phase) e_axis_out``."""
    u = np.zeros((2, 3, 3), dtype=complex)
    c = sh.amplitude * np.exp(1j * sh.phase) / 2j
    plus = [1, 1]
    minus = [1, 1]
    plus[sh.axis_in] = 2
    minus[sh.axis_in] = 0
    u[sh.axis_out][tuple(plus)] = c
    u[sh.axis_out][tuple(minus)] = np.conj(c)
    return u


@dataclass(eq=False)
class RandomBandFlow(VelocityModel):
    """Divergence-free flow on ``0 < |k| <= L`` with Ornstein-Uhlenbeck amplitudes.

    Each mode pair ``+-k`` carries a complex amplitude ``a_k`` with unit
    relaxation rate and stationary variance ``|k|^-spectrum_decay`` (normalised
    so that ``E ||u||_L2^2 = amplitude^2``).  The process is sampled exactly on a
    lattice of spacing ``knot_interval`` and interpolated linearly between
    knots, so coefficient paths are continuous and the law is invariant under
    shifts by multiples of the knot spacing.
    """

    band_limit: int
    spectrum_decay: float
    seed: int
    amplitude: float = 1.0
    knot_interval: float = 1.0 / 16

    def __post_init__(self):
        if self.band_limit < 1:
            raise ValueError("band_limit must be >= 1")
        k1, k2 = band_wavevectors(self.band_limit)
        mod = np.hypot(k1, k2)
        half = ((k1 > 0) | ((k1 == 0) & (k2 > 0))) & (mod <= self.band_limit)
        self._half = np.argwhere(half)
        kk = np.stack([k1[half], k2[half]], axis=1).astype(float)
        norm = np.hypot(kk[:, 0], kk[:, 1])
        self._perp = np.stack([-kk[:, 1], kk[:, 0]], axis=1) / norm[:, None]
        var = norm ** (-self.spectrum_decay)
        self._sigma = np.sqrt(var / (2 * var.sum()))
        self._rho = math.exp(-self.knot_interval)
        self._rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(2,)))
        self._knots = [self._sigma * _complex_normal(self._rng, self._sigma.size)]

    def _knot(self, n: int) -> np.ndarray:
        innov = self._sigma * math.sqrt(1 - self._rho**2)
        while len(self._knots) <= n:
            self._knots.append(self._rho * self._knots[-1] + innov * _complex_normal(self._rng, self._sigma.size))
        return self._knots[n]

    def mode_amplitudes(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError("time must be nonnegative")
        s = t / self.knot_interval
        n = math.floor(s + 1e-12)
        frac = max(s - n, 0.0)
        a = self._knot(n)
        if frac > 1e-12:
            a = (1 - frac) * a + frac * self._knot(n + 1)
        return self.amplitude * a

    def coefficients(self, t: float) -> np.ndarray:
        L = self.band_limit
        u = np.zeros((2, 2 * L + 1, 2 * L + 1), dtype=complex)
        a = self.mode_amplitudes(t)
        vec = a[:, None] * self._perp
        for (i, j), v in zip(self._half, vec):
            u[:, i, j] = v
            u[:, 2 * L - i, 2 * L - j] = np.conj(v)
        return u


def _complex_normal(rng: np.random.Generator, n: int) -> np.ndarray:
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)


def pierrehumbert(amplitude: float, period: float, seed: int, *, offset_steps: int = 0) -> Pierrehumbert:
    return Pierrehumbert(amplitude=amplitude, period=period, seed=seed, offset_steps=offset_steps)


def random_band_flow(band_limit: int, spectrum_decay: float, seed: int, *, amplitude: float = 1.0) -> RandomBandFlow:
    return RandomBandFlow(band_limit=band_limit, spectrum_decay=spectrum_decay, seed=seed, amplitude=amplitude)


class ZeroFlow(VelocityModel):
    """The trivial flow; band limit 1 so it fits every stencil."""

    def __init__(self):
        self.band_limit = 1
        self.amplitude = 0.0

    def coefficients(self, t: float) -> np.ndarray:
        return np.zeros((2, 3, 3), dtype=complex)


@dataclass(frozen=True)
class Weight:
    """Increasing weight ``w : [0, inf) -> [1, inf]``.

    ``indicator``: ``w(s) = 2L`` for ``s <= L`` and ``+inf`` beyond.
    ``polynomial``: ``w(s) = 2 (1 + s)^q``.
    """

    kind: str
    param: float

    def __post_init__(self):
        if self.kind == "indicator":
            if self.param < 0.5:
                raise ValueError("indicator weight needs L >= 1/2 so that w >= 1")
        elif self.kind == "polynomial":
            if not 0 <= self.param <= _MAX_POLYNOMIAL_ORDER:
                raise ValueError(f"polynomial order must lie in [0, {_MAX_POLYNOMIAL_ORDER}]")
        else:
            raise ValueError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def indicator(cls, L: float) -> "Weight":
        return cls("indicator", float(L))

    @classmethod
    def polynomial(cls, q: float) -> "Weight":
        return cls("polynomial", float(q))

    @property
    def label(self) -> str:
        return f"{self.kind}({self.param:g})"

    def finite(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == "indicator":
            return s <= self.param
        return np.ones(s.shape, dtype=bool)

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == "indicator":
            return np.where(s <= self.param, 2 * self.param, np.inf)
        return 2.0 * (1.0 + s) ** self.param

    def inverse(self, s) -> np.ndarray:
        """``1 / w(s)`` with ``1 / inf = 0`` exactly."""
        s = np.asarray(s, dtype=float)
        if self.kind == "indicator":
            return np.where(s <= self.param, 1.0 / (2 * self.param), 0.0)
        return 0.5 * (1.0 + s) ** (-self.param)

    def inverse_integral(self) -> float:
        """``int_0^inf 1 / w(s) ds`` (``inf`` when divergent)."""
        if self.kind == "indicator":
            return 0.5
        q = self.param
        return math.inf if q <= 1 else 1.0 / (2 * (q - 1))


def coefficient_magnitudes(u_coeffs: np.ndarray) -> np.ndarray:
    """Euclidean magnitude of each vector coefficient."""
    return np.sqrt(np.sum(np.abs(u_coeffs) ** 2, axis=0))


def weighted_l1_coeffs(u_coeffs: np.ndarray, w: Weight) -> float:
    """``sum_k w(|k|) |uhat(k)|``; ``inf`` if an active mode sits where ``w = inf``."""
    L = (u_coeffs.shape[-1] - 1) // 2
    k1, k2 = band_wavevectors(L)
    mod = np.hypot(k1, k2)
    mag = coefficient_magnitudes(u_coeffs)
    active = mag > 0
    if np.any(active & ~w.finite(mod)):
        return math.inf
    return float(np.sum(w(mod[active]) * mag[active]))


def weighted_l1(u: VelocityModel, t: float, w: Weight) -> float:
    return weighted_l1_coeffs(u.coefficients(t), w)


def divergence_residual(u_coeffs: np.ndarray) -> float:
    """``sum_k |k . uhat(k)|``; zero for divergence-free fields."""
    L = (u_coeffs.shape[-1] - 1) // 2
    k1, k2 = band_wavevectors(L)
    return float(np.sum(np.abs(k1 * u_coeffs[0] + k2 * u_coeffs[1])))
