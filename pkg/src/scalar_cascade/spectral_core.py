"""Integer wavevector lattice, spectral scalar fields, projectors and norms.

A scalar on the unit torus is stored through its Fourier amplitudes with the
convention ``f(x) = sum_k fhat(k) exp(2 pi i k.x)``.  Amplitudes live on the
square lattice ``|k1|, |k2| <= N`` in *centred* layout: array index ``i``
corresponds to wavenumber ``i - N`` along each axis (axis 0 is ``k1``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi
FOUR_PI_SQ = 4.0 * np.pi**2


@dataclass(frozen=True)
class WaveGrid:
    """Truncated lattice ``{k in Z^2 : |k1|, |k2| <= max_mode}``."""

    max_mode: int
    dim: int = 2

    def __post_init__(self):
        if self.dim != 2:
            raise ValueError("only two-dimensional lattices are supported")
        if self.max_mode < 1:
            raise ValueError("max_mode must be >= 1")

    @property
    def size(self) -> int:
        return 2 * self.max_mode + 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.size, self.size)

    @cached_property
    def modes(self) -> np.ndarray:
        return np.arange(-self.max_mode, self.max_mode + 1)

    @cached_property
    def k1(self) -> np.ndarray:
        return np.broadcast_to(self.modes[:, None], self.shape)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.broadcast_to(self.modes[None, :], self.shape)

    @cached_property
    def modulus_sq(self) -> np.ndarray:
        return (self.k1**2 + self.k2**2).astype(np.int64)

    @cached_property
    def modulus_table(self) -> np.ndarray:
        return np.sqrt(self.modulus_sq.astype(float))

    @cached_property
    def _shells(self) -> tuple[np.ndarray, np.ndarray]:
        sq, inverse = np.unique(self.modulus_sq.ravel(), return_inverse=True)
        return np.sqrt(sq.astype(float)), inverse.reshape(self.shape)

    @property
    def shell_radii(self) -> np.ndarray:
        """Distinct values of ``|k|`` on the lattice, ascending (includes 0)."""
        return self._shells[0]

    @property
    def shell_index(self) -> np.ndarray:
        """Per-site index into :attr:`shell_radii`."""
        return self._shells[1]

    def shell_sum(self, values: np.ndarray) -> np.ndarray:
        """Sum a per-site real array over each shell ``|k| = rho``."""
        return np.bincount(self.shell_index.ravel(), weights=np.ravel(values),
                           minlength=self.shell_radii.size)

    def index_of(self, k: tuple[int, int]) -> tuple[int, int]:
        k1, k2 = k
        if max(abs(k1), abs(k2)) > self.max_mode:
            raise IndexError(f"mode {k} outside lattice of max_mode {self.max_mode}")
        return (k1 + self.max_mode, k2 + self.max_mode)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=complex)


def negate(amplitudes: np.ndarray) -> np.ndarray:
    """Return the array indexed by ``-k`` (centred layout)."""
    return amplitudes[..., ::-1, ::-1]


def hermitian_part(amplitudes: np.ndarray) -> np.ndarray:
    return 0.5 * (amplitudes + np.conj(negate(amplitudes)))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real, mean-free scalar on the torus stored as Fourier amplitudes."""

    grid: WaveGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != self.grid.shape:
            raise ValueError(f"amplitude shape {self.amplitudes.shape} does not match grid {self.grid.shape}")

    @classmethod
    def zero(cls, grid: WaveGrid) -> "SpectralField":
        return cls(grid, grid.zeros())

    @classmethod
    def from_modes(cls, grid: WaveGrid, modes: dict[tuple[int, int], complex]) -> "SpectralField":
        """Build a real field from amplitudes given on half of the modes.

        The conjugate amplitude is written at ``-k`` automatically.
        """
        a = grid.zeros()
        for k, c in modes.items():
            if k == (0, 0):
                raise ValueError("the zero mode must vanish")
            a[grid.index_of(k)] += c
            a[grid.index_of((-k[0], -k[1]))] += np.conj(c)
        return cls(grid, a)

    @classmethod
    def random(cls, grid: WaveGrid, rng: np.random.Generator, *, band: int | None = None,
               normalize: bool = True) -> "SpectralField":
        """Random Hermitian, mean-free field; optionally supported in ``|k|_inf <= band``."""
        a = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        a = hermitian_part(a)
        a[grid.max_mode, grid.max_mode] = 0.0
        if band is not None:
            a[np.maximum(np.abs(grid.k1), np.abs(grid.k2)) > band] = 0.0
        f = cls(grid, a)
        return f.normalized() if normalize else f

    @property
    def mean(self) -> complex:
        n = self.grid.max_mode
        return complex(self.amplitudes[n, n])

    def normalized(self) -> "SpectralField":
        return SpectralField(self.grid, self.amplitudes / np.sqrt(l2_norm_sq(self)))

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        a = self.amplitudes
        return bool(np.allclose(a, np.conj(negate(a)), rtol=0.0, atol=atol))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.amplitudes - other.amplitudes)

    def __mul__(self, c: float) -> "SpectralField":
        return SpectralField(self.grid, self.amplitudes * c)

    __rmul__ = __mul__


def high_mask(grid: WaveGrid, r: float) -> np.ndarray:
    return grid.modulus_table >= r


def project_high(f: SpectralField, r: float) -> SpectralField:
    """Keep the modes with ``|k| >= r``."""
    if r < 0:
        raise ValueError("projection radius must be nonnegative")
    return SpectralField(f.grid, np.where(high_mask(f.grid, r), f.amplitudes, 0.0))


def project_low(f: SpectralField, r: float) -> SpectralField:
    """Keep the modes with ``|k| < r``; complement of :func:`project_high`."""
    if r < 0:
        raise ValueError("projection radius must be nonnegative")
    return SpectralField(f.grid, np.where(high_mask(f.grid, r), 0.0, f.amplitudes))


def inner(f: SpectralField, g: SpectralField) -> complex:
    """L2 inner product ``sum_k fhat(k) conj(ghat(k))``."""
    return complex(np.vdot(g.amplitudes, f.amplitudes))


def l2_norm_sq(f: SpectralField) -> float:
    return float(np.sum(np.abs(f.amplitudes) ** 2))


def grad_norm_sq(f: SpectralField) -> float:
    return float(np.sum(FOUR_PI_SQ * f.grid.modulus_sq * np.abs(f.amplitudes) ** 2))


def hminus1_weights(grid: WaveGrid) -> np.ndarray:
    with np.errstate(divide="ignore"):
        w = 1.0 / (FOUR_PI_SQ * grid.modulus_sq)
    w[grid.max_mode, grid.max_mode] = 0.0
    return w


def hminus1_norm_sq(f: SpectralField, atol: float = 1e-14) -> float:
    """Homogeneous ``H^-1`` norm squared; defined for mean-free fields only."""
    if abs(f.mean) > atol:
        raise ValueError("H^-1 norm requires a mean-free field")
    return float(np.sum(hminus1_weights(f.grid) * np.abs(f.amplitudes) ** 2))


def min_physical_size(grid: WaveGrid, band: int = 0) -> int:
    return 2 * grid.max_mode + 1 + 2 * band


def alias_free_size(grid: WaveGrid, band: int) -> int:
    """Smallest FFT-friendly grid that resolves products against a band-``band`` factor."""
    return sfft.next_fast_len(min_physical_size(grid, band))


def _wrapped_modes(grid: WaveGrid, size: int) -> np.ndarray:
    return grid.modes % size


def embed(grid: WaveGrid, amplitudes: np.ndarray, size: int) -> np.ndarray:
    """Place centred amplitudes into an FFT-ordered ``size x size`` array."""
    out = np.zeros(amplitudes.shape[:-2] + (size, size), dtype=complex)
    idx = _wrapped_modes(grid, size)
    out[..., idx[:, None], idx[None, :]] = amplitudes
    return out


def extract(grid: WaveGrid, spectrum: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed`: read the lattice modes out of an FFT-ordered array."""
    idx = _wrapped_modes(grid, spectrum.shape[-1])
    return spectrum[..., idx[:, None], idx[None, :]]


def to_physical(f: SpectralField, size: int | None = None, *, band: int = 0) -> np.ndarray:
    """Sample ``f`` on the uniform ``size x size`` grid ``x = (n1, n2) / size``.

    ``band`` is the bandwidth of whatever the samples will be multiplied with;
    the grid must hold ``2N + 1 + 2 band`` points per axis for the product to be
    alias free.
    """
    need = min_physical_size(f.grid, band)
    size = need if size is None else size
    if size < need:
        raise ValueError(f"physical grid of {size} points is undersized; need >= {need}")
    return sfft.ifft2(embed(f.grid, f.amplitudes, size), norm="forward").real


def to_spectral(samples: np.ndarray, grid: WaveGrid) -> SpectralField:
    """Fourier amplitudes of uniformly sampled data, truncated to ``grid``."""
    size = samples.shape[-1]
    if samples.shape != (size, size):
        raise ValueError("samples must be a square array")
    if size < min_physical_size(grid):
        raise ValueError(f"physical grid of {size} points cannot represent max_mode {grid.max_mode}")
    return SpectralField(grid, extract(grid, sfft.fft2(samples, norm="forward")))
