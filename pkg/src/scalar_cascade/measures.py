"""Shell measures on radii ``|k|`` and the statistics built from them.

All measures here are atomic: finitely many atoms at the lattice radii.
Annuli ``[r, r + h]`` are closed at both ends, so abutting annuli can count an
atom sitting exactly on their common boundary twice.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import trapezoid

from scalar_cascade.evolution import TrajectoryRecord
from scalar_cascade.spectral_core import SpectralField
from scalar_cascade.velocity_models import Weight


class MixingError(RuntimeError):
    """No usable exponential-decay window in the ensemble H^-1 curve."""


class ResolutionError(RuntimeError):
    """The run dissipated too little energy for the dissipation scale to exist."""


@dataclass(frozen=True, eq=False)
class ShellMeasure:
    """Atoms ``mass[i]`` at radii ``radii[i]`` (ascending), with optional standard errors."""

    radii: np.ndarray
    masses: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self):
        if self.radii.shape != self.masses.shape:
            raise ValueError("radii and masses must have the same shape")
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly increasing")
        if np.any(self.masses < 0):
            raise ValueError("shell masses must be nonnegative")

    @classmethod
    def empty(cls) -> "ShellMeasure":
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def from_atoms(cls, atoms: dict[float, float]) -> "ShellMeasure":
        rs = sorted(atoms)
        return cls(np.array(rs, dtype=float), np.array([atoms[r] for r in rs], dtype=float))

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def as_dict(self) -> dict[float, float]:
        return {float(r): float(m) for r, m in zip(self.radii, self.masses) if m != 0}

    def restrict(self, lo: float = -math.inf, hi: float = math.inf) -> "ShellMeasure":
        keep = (self.radii >= lo) & (self.radii <= hi)
        se = None if self.stderr is None else self.stderr[keep]
        return ShellMeasure(self.radii[keep], self.masses[keep], se)

    def mass_in(self, lo: float, hi: float) -> float:
        """Mass of the closed interval ``[lo, hi]``."""
        i = np.searchsorted(self.radii, lo, side="left")
        j = np.searchsorted(self.radii, hi, side="right")
        return float(self.masses[i:j].sum())

    def cumulative(self, R) -> np.ndarray:
        """``m([1, R])`` for each ``R``."""
        c = np.concatenate([[0.0], np.cumsum(np.where(self.radii >= 1, self.masses, 0.0))])
        return c[np.searchsorted(self.radii, np.asarray(R, dtype=float), side="right")]

    def to_csv(self, path: str | Path) -> None:
        se = np.zeros_like(self.masses) if self.stderr is None else self.stderr
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["radius", "mass", "stderr"])
            for row in zip(self.radii, self.masses, se):
                out.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "ShellMeasure":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2])


def instantaneous_mass(phi: SpectralField) -> ShellMeasure:
    """Shell masses ``sum_{|k| = rho} |phihat(k)|^2`` at every lattice radius."""
    grid = phi.grid
    return ShellMeasure(grid.shell_radii, grid.shell_sum(np.abs(phi.amplitudes) ** 2))


class MassEstimate(NamedTuple):
    measure: ShellMeasure
    tail_bound: float | None


def _check_compatible(records: Sequence[TrajectoryRecord]) -> None:
    if not records:
        raise ValueError("empty ensemble")
    ref = records[0]
    for rec in records[1:]:
        same = (rec.max_mode == ref.max_mode and rec.nu == ref.nu and rec.dt == ref.dt and rec.T == ref.T
                and rec.meta.get("law") == ref.meta.get("law"))
        if not same:
            raise ValueError("ensemble mixes trajectories from different configurations")


def _mean_and_stderr(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = samples.shape[0]
    mean = samples.mean(axis=0)
    if m < 2:
        return mean, np.zeros_like(mean)
    return mean, samples.std(axis=0, ddof=1) / math.sqrt(m)


def estimate_mass_measure(records: Sequence[TrajectoryRecord], *, quadrature: str = "trapezoid",
                          fit: "MixingFit | None" = None) -> MassEstimate:
    """Ensemble mean of the time-integrated instantaneous mass measure.

    The neglected tail beyond ``T`` is bounded through the mixing fit as
    ``K exp(-gamma T) / gamma`` and reported, not added.
    """
    _check_compatible(records)
    if quadrature == "trapezoid":
        data = np.array([rec.mass_integral for rec in records])
    elif quadrature == "left":
        data = np.array([rec.mass_integral_left for rec in records])
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    mean, se = _mean_and_stderr(data)
    grid = records[0].grid
    tail = None
    if fit is not None:
        T = records[0].T
        tail = fit.K * math.exp(-fit.gamma * T) / fit.gamma
    return MassEstimate(ShellMeasure(grid.shell_radii, mean, se), tail)


def annulus_mass(m: ShellMeasure, r: float, h: float) -> float:
    """``m([r, r + h])``, both ends included."""
    if not h > 0:
        raise ValueError("annulus width must be positive")
    return m.mass_in(r, r + h)


def weight_convolve(m: ShellMeasure, w: Weight, r) -> np.ndarray | float:
    """``sum_rho m(rho) / w(|r - rho|)``, vectorised over ``r``."""
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if m.radii.size == 0:
        out = np.zeros(r_arr.shape)
    else:
        out = w.inverse(np.abs(r_arr[:, None] - m.radii[None, :])) @ m.masses
    return float(out[0]) if np.ndim(r) == 0 else out


# -- sets of radii and logarithmic density ------------------------------------

def merge_intervals(intervals: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[list[float]] = []
    for lo, hi in sorted((float(a), float(b)) for a, b in intervals if b > a):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(a, b) for a, b in out]


MIN_POINTS_PER_DECADE = 512


class GridIndicator(NamedTuple):
    """A set of radii sampled as a boolean mask on an increasing grid."""

    r: np.ndarray
    mask: np.ndarray


def log_grid(a: float, b: float, points_per_decade: int = MIN_POINTS_PER_DECADE) -> np.ndarray:
    n = max(2, int(math.ceil(points_per_decade * math.log10(b / a))) + 1)
    return np.geomspace(a, b, n)


RadiusSet = Sequence[tuple[float, float]] | Callable[[np.ndarray], np.ndarray] | GridIndicator


def log_density(E: RadiusSet, a: float, b: float) -> float:
    """``mu_{a,b}(E) = log(b/a)^-1 int_{E cap [a,b]} dr / r``.

    ``E`` is a collection of intervals (integrated exactly), a
    :class:`GridIndicator` covering ``[a, b]`` at no less than 512 points per
    decade, or an indicator function of ``r`` (sampled on such a grid).  The
    last two are integrated by the trapezoid rule in ``log r``.
    """
    if not 0 < a < b:
        raise ValueError("log density needs 0 < a < b")
    norm = math.log(b / a)
    if callable(E) and not isinstance(E, tuple):
        r = log_grid(a, b)
        E = GridIndicator(r, np.asarray(E(r), dtype=bool))
    if isinstance(E, GridIndicator):
        r = np.asarray(E.r, dtype=float)
        keep = (r >= a * (1 - 1e-12)) & (r <= b * (1 + 1e-12))
        r, ind = r[keep], np.asarray(E.mask, dtype=float)[keep]
        if r.size < 2 or r[0] > a * (1 + 1e-9) or r[-1] < b * (1 - 1e-9):
            raise ValueError("indicator grid does not cover [a, b]")
        if np.max(np.diff(np.log10(r))) > 1.0 / MIN_POINTS_PER_DECADE + 1e-12:
            raise ValueError(f"indicator grid is coarser than {MIN_POINTS_PER_DECADE} points per decade")
        return float(trapezoid(ind, np.log(r)) / norm)
    total = 0.0
    for lo, hi in merge_intervals(E):
        lo, hi = max(lo, a), min(hi, b)
        if hi > lo:
            total += math.log(hi / lo)
    return total / norm


def _annulus_pieces(m: ShellMeasure, h: float, lo: float, hi: float):
    """Split ``(lo, hi)`` into open pieces on which ``r -> m([r, r+h])`` is constant."""
    bps = np.concatenate([m.radii, m.radii - h])
    bps = np.unique(bps[(bps > lo) & (bps < hi)])
    edges = np.concatenate([[lo], bps, [hi]])
    for left, right in zip(edges[:-1], edges[1:]):
        if right > left:
            yield float(left), float(right), annulus_mass(m, 0.5 * (left + right), h)


def bad_set_intervals(m: ShellMeasure, h: float, alpha: float, lo: float = 1.0,
                      hi: float | None = None, *, tail: float = 0.0) -> list[tuple[float, float]]:
    """Undercharged radii ``{r : m([r, r+h]) <= alpha h / r}`` in ``[lo, hi]``, exactly (up to null sets).

    ``tail`` is added to every annulus mass first (the conservative treatment
    of mass not yet accumulated by the finite horizon).
    """
    _check_h_alpha(h, alpha)
    hi = _default_hi(m, h) if hi is None else hi
    out = []
    for left, right, M in _annulus_pieces(m, h, lo, hi):
        M += tail
        cut = right if M == 0 else min(right, alpha * h / M)
        if cut > left:
            out.append((left, cut))
    return merge_intervals(out)


def overcharged_set_intervals(m: ShellMeasure, h: float, alpha: float, lo: float = 1.0,
                              hi: float | None = None, *, tail: float = 0.0) -> list[tuple[float, float]]:
    """Overcharged radii ``{r : m([r, r+h]) >= alpha h / r}`` in ``[lo, hi]``."""
    _check_h_alpha(h, alpha)
    hi = _default_hi(m, h) if hi is None else hi
    out = []
    for left, right, M in _annulus_pieces(m, h, lo, hi):
        M += tail
        if M > 0:
            cut = max(left, alpha * h / M)
            if right > cut:
                out.append((cut, right))
    return merge_intervals(out)


def _annulus_masses(m: ShellMeasure, r: np.ndarray, h: float) -> np.ndarray:
    c = np.concatenate([[0.0], np.cumsum(m.masses)])
    return c[np.searchsorted(m.radii, r + h, side="right")] - c[np.searchsorted(m.radii, r, side="left")]


def bad_set(m: ShellMeasure, h: float, alpha: float, r_grid, *, tail: float = 0.0) -> GridIndicator:
    """Indicator of the undercharged set evaluated on ``r_grid``."""
    _check_h_alpha(h, alpha)
    r = np.asarray(r_grid, dtype=float)
    return GridIndicator(r, _annulus_masses(m, r, h) + tail <= alpha * h / r)


def overcharged_set(m: ShellMeasure, h: float, alpha: float, r_grid, *, tail: float = 0.0) -> GridIndicator:
    _check_h_alpha(h, alpha)
    r = np.asarray(r_grid, dtype=float)
    return GridIndicator(r, _annulus_masses(m, r, h) + tail >= alpha * h / r)


def alpha_star(m: ShellMeasure, h: float, lo: float, hi: float) -> float:
    """Largest ``alpha`` for which the undercharged set has zero log density on ``[lo, hi]``.

    Equals the essential infimum of ``r m([r, r+h]) / h`` over the window.
    """
    if not lo < hi:
        raise ValueError(f"empty window [{lo:g}, {hi:g}]")
    return min(left * M / h for left, _, M in _annulus_pieces(m, h, lo, hi))


def _check_h_alpha(h: float, alpha: float) -> None:
    if not h > 0:
        raise ValueError("annulus width must be positive")
    if not alpha > 0:
        raise ValueError("alpha must be positive")


def _default_hi(m: ShellMeasure, h: float) -> float:
    return float(m.radii[-1]) + h if m.radii.size else 1.0 + h


# -- dissipation scale, mixing fit, N0 -----------------------------------------

def cumulative_dissipation(records: Sequence[TrajectoryRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Radii and ``eps(r) = 2 nu E int sum_{|k| >= r} |grad phihat|^2 dt`` at each lattice radius."""
    _check_compatible(records)
    mean = np.mean([rec.dissipated for rec in records], axis=0)
    tail = np.cumsum(mean[::-1])[::-1]
    return records[0].grid.shell_radii, tail


def dissipation_scale(records: Sequence[TrajectoryRecord], *, tolerance: float = 1e-3) -> float:
    """Largest lattice radius carrying at least half of the total dissipation above it."""
    radii, eps = cumulative_dissipation(records)
    if eps[0] < 0.5 + tolerance:
        raise ResolutionError(f"only {eps[0]:.4f} of the energy was dissipated; lengthen the run")
    return float(radii[np.nonzero(eps >= 0.5)[0][-1]])


@dataclass(frozen=True)
class MixingFit:
    """Certified envelope ``K exp(-gamma t)`` of the ensemble-mean ``||phi_t||_{H^-1}^2``."""

    K: float
    gamma: float
    residual: float
    window: tuple[float, float]

    def envelope(self, t) -> np.ndarray:
        return self.K * np.exp(-self.gamma * np.asarray(t, dtype=float))


def hminus1_curve(records: Sequence[TrajectoryRecord]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    _check_compatible(records)
    mean, se = _mean_and_stderr(np.array([rec.hminus1 for rec in records]))
    return records[0].times, mean, se


def fit_mixing(records: Sequence[TrajectoryRecord], *, snr: float = 100.0) -> MixingFit:
    """Least-squares exponential fit over the window where the mean exceeds ``snr`` standard errors.

    The fitted line is then shifted up until it dominates every sample, and
    ``K`` is floored at 1.
    """
    t, mean, se = hminus1_curve(records)
    ok = (mean > snr * se) & (mean > 0)
    start = int(np.argmax(ok)) if ok.any() else 0
    stop = start
    while stop < ok.size and ok[stop]:
        stop += 1
    if stop - start < 3:
        raise MixingError("fit window is empty: no resolvable decay of the H^-1 norm")
    tw, yw = t[start:stop], np.log(mean[start:stop])
    slope, intercept = np.polyfit(tw, yw, 1)
    gamma = -float(slope)
    # a decay of less than one part in 1e9 over the window is rounding, not mixing
    if not gamma * (tw[-1] - tw[0]) > 1e-9:
        raise MixingError(f"fitted decay rate {gamma:.3g} is not positive")
    resid = float(np.sqrt(np.mean((yw - (intercept + slope * tw)) ** 2)))
    pos = mean > 0
    lift = float(np.max(np.log(mean[pos]) + gamma * t[pos]))
    K = max(1.0, math.exp(max(lift, intercept)))
    return MixingFit(K=K, gamma=gamma, residual=resid, window=(float(tw[0]), float(tw[-1])))


def recommended_horizon(gamma: float, max_mode: int, factor: float = 10.0) -> float:
    """``ceil(factor / gamma * log N)``, the horizon rule for asymptotic quantities."""
    return float(math.ceil(factor / gamma * math.log(max_mode)))


def n_zero(g: SpectralField) -> float:
    """Smallest lattice radius ``r >= 1`` with ``||Pi_{>=r} g||^2 <= 1/4``."""
    m = instantaneous_mass(g)
    tail = np.cumsum(m.masses[::-1])[::-1]
    ok = (m.radii >= 1) & (tail <= 0.25)
    if ok.any():
        return float(m.radii[np.argmax(ok)])
    # all mass sits on the outermost shell: the next radius beyond the lattice works
    return float(m.radii[-1] + 1)


# -- cumulative log-spectrum ---------------------------------------------------

class LogGrowthFit(NamedTuple):
    slope: float
    intercept: float
    relative_residual: float
    radii: np.ndarray
    cumulative: np.ndarray
    doubling_ratios: np.ndarray


def log_growth_fit(m: ShellMeasure, lo: float, hi: float, n: int = 32) -> LogGrowthFit:
    """Fit ``m([1, R]) ~ slope log R + c`` on log-spaced ``R`` in ``[lo, hi]``.

    The relative residual is ``||y - fit|| / ||y - mean(y)||``.  Doubling
    ratios ``m([1, 2R]) / m([1, R])`` are reported for the sampled ``R`` whose
    double still lies in the window.
    """
    if not lo < hi:
        raise ValueError(f"empty window [{lo:g}, {hi:g}]")
    R = np.geomspace(lo, hi, n)
    y = m.cumulative(R)
    x = np.log(R)
    slope, intercept = np.polyfit(x, y, 1)
    spread = np.linalg.norm(y - y.mean())
    resid = np.linalg.norm(y - (slope * x + intercept))
    rel = float(resid / spread) if spread > 0 else math.inf
    inner = R[2 * R <= hi * (1 + 1e-12)]
    base = m.cumulative(inner)
    ratios = m.cumulative(2 * inner) / np.where(base > 0, base, np.nan)
    return LogGrowthFit(float(slope), float(intercept), rel, R, y, ratios)


def cumulative_table(m: ShellMeasure) -> tuple[np.ndarray, np.ndarray]:
    """``(R, m([1, R]))`` at every lattice radius ``R >= 1``."""
    R = m.radii[m.radii >= 1]
    return R, m.cumulative(R)

