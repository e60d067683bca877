"""Pointwise audit of the spectral flux inequality along trajectories.

For a state ``phi``, velocity ``u`` and radius ``r`` three quantities are
compared::

    lhs          = d/dt ||P_{>=r} phi||^2 + 2 nu ||P_{>=r} grad phi||^2
    rhs_bilinear = 4 pi r sum_{|k| >= r > |j|} |phihat(k)| |uhat(k - j)| |phihat(j)|
    rhs_young    = 4 pi r ||w uhat||_l1 (w^-1 * m_t)(r)

and the chain ``lhs <= rhs_bilinear <= rhs_young`` must hold up to a rounding
tolerance.  The time derivative comes from the Galerkin right-hand side, never
from finite differences.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from scalar_cascade.evolution import (
    TAIL_RADIUS,
    TAIL_TOLERANCE,
    IntegratorSpec,
    TrajectoryRecord,
    galerkin_rhs,
    run_phi,
)
from scalar_cascade.measures import ShellMeasure, weight_convolve
from scalar_cascade.spectral_core import FOUR_PI_SQ, SpectralField, WaveGrid
from scalar_cascade.velocity_models import (
    VelocityModel,
    Weight,
    band_wavevectors,
    coefficient_magnitudes,
    weighted_l1_coeffs,
)

CSV_FIELDS = ("t", "r", "weight_kind", "lhs", "rhs_bilinear", "rhs_young",
              "slack_bilinear", "slack_young", "status")
RELATIVE_TOLERANCE = 1e-10
EQUALITY_TOLERANCE = 1e-12


def _tail_sums(grid: WaveGrid, per_site: np.ndarray, r: np.ndarray) -> np.ndarray:
    """``sum_{|k| >= r} per_site(k)`` for each ``r``, via shell sums."""
    shells = grid.shell_sum(per_site)
    tail = np.concatenate([np.cumsum(shells[::-1])[::-1], [0.0]])
    return tail[np.searchsorted(grid.shell_radii, r, side="left")]


def bilinear_flux(phi: SpectralField, u_coeffs: np.ndarray, r) -> np.ndarray:
    """``4 pi r sum_{|k| >= r, |j| < r} |phihat(k)| |uhat(k - j)| |phihat(j)|`` for each ``r``.

    For every stencil offset ``m = k - j`` a pair ``(j, j + m)`` contributes at
    exactly the radii ``|j| < r <= |j + m|``, so each offset reduces to two
    sorted prefix sums.
    """
    grid = phi.grid
    r = np.atleast_1d(np.asarray(r, dtype=float))
    N = grid.max_mode
    amp = np.abs(phi.amplitudes)
    mod = grid.modulus_table
    umag = coefficient_magnitudes(u_coeffs)
    L = (u_coeffs.shape[-1] - 1) // 2
    m1, m2 = band_wavevectors(L)
    total = np.zeros(r.shape)
    for a, b, c in zip(m1.ravel(), m2.ravel(), umag.ravel()):
        if c == 0:
            continue
        # j ranges over sites with j + m also on the lattice
        js = (slice(max(0, -a), 2 * N + 1 - max(0, a)), slice(max(0, -b), 2 * N + 1 - max(0, b)))
        ks = (slice(max(0, a), 2 * N + 1 - max(0, -a)), slice(max(0, b), 2 * N + 1 - max(0, -b)))
        lo, hi = mod[js].ravel(), mod[ks].ravel()
        p = c * (amp[js] * amp[ks]).ravel()
        up = (hi > lo) & (p > 0)
        lo, hi, p = lo[up], hi[up], p[up]
        o_lo, o_hi = np.argsort(lo, kind="stable"), np.argsort(hi, kind="stable")
        c_lo = np.concatenate([[0.0], np.cumsum(p[o_lo])])
        c_hi = np.concatenate([[0.0], np.cumsum(p[o_hi])])
        total += c_lo[np.searchsorted(lo[o_lo], r, side="left")] - c_hi[np.searchsorted(hi[o_hi], r, side="left")]
    return 4 * np.pi * r * total


def bilinear_flux_oracle(phi: SpectralField, u_coeffs: np.ndarray, r: float) -> float:
    """Direct double sum over all lattice pairs (quartic cost, small grids only)."""
    grid = phi.grid
    N = grid.max_mode
    L = (u_coeffs.shape[-1] - 1) // 2
    umag = coefficient_magnitudes(u_coeffs)
    amp = np.abs(phi.amplitudes)
    total = 0.0
    for k1 in range(-N, N + 1):
        for k2 in range(-N, N + 1):
            if math.hypot(k1, k2) < r:
                continue
            for j1 in range(-N, N + 1):
                for j2 in range(-N, N + 1):
                    d1, d2 = k1 - j1, k2 - j2
                    if math.hypot(j1, j2) >= r or abs(d1) > L or abs(d2) > L:
                        continue
                    total += amp[k1 + N, k2 + N] * umag[d1 + L, d2 + L] * amp[j1 + N, j2 + N]
    return 4 * math.pi * r * total


def audit_tolerance(phi_norm_sq: float, u_coeffs: np.ndarray) -> float:
    l1 = float(coefficient_magnitudes(u_coeffs).sum())
    return RELATIVE_TOLERANCE * (1.0 + phi_norm_sq * l1)


@dataclass(eq=False)
class FluxReport:
    """All three inequality layers at one time ``t`` for every radius and weight.

    ``rhs_young`` and the derived slacks have shape ``(len(weights), len(r))``;
    the weight-independent layers have shape ``(len(r),)``.  Radii beyond
    ``N - L``, or every radius when the state's truncation tail is too large,
    are marked skipped.
    """

    t: float
    r: np.ndarray
    weights: list[Weight]
    lhs_derivative: np.ndarray
    lhs_dissipation: np.ndarray
    rhs_bilinear: np.ndarray
    rhs_young: np.ndarray
    tolerance: float
    skipped: np.ndarray

    @property
    def scale(self) -> float:
        return self.tolerance / RELATIVE_TOLERANCE

    @property
    def lhs(self) -> np.ndarray:
        return self.lhs_derivative + self.lhs_dissipation

    @property
    def slack_bilinear(self) -> np.ndarray:
        return self.rhs_bilinear - self.lhs

    @property
    def slack_young(self) -> np.ndarray:
        return self.rhs_young - self.rhs_bilinear[None, :]

    @property
    def status(self) -> np.ndarray:
        ok = (self.slack_bilinear[None, :] >= -self.tolerance) & (self.slack_young >= -self.tolerance)
        out = np.where(ok, "pass", "fail").astype(object)
        out[:, self.skipped] = "skipped"
        return out

    @property
    def passed(self) -> bool:
        return not np.any(self.status == "fail")

    def rows(self):
        sb, sy, st = self.slack_bilinear, self.slack_young, self.status
        for iw, w in enumerate(self.weights):
            for ir, r in enumerate(self.r):
                yield {
                    "t": self.t, "r": r, "weight_kind": w.label, "lhs": self.lhs[ir],
                    "rhs_bilinear": self.rhs_bilinear[ir], "rhs_young": self.rhs_young[iw, ir],
                    "slack_bilinear": sb[ir], "slack_young": sy[iw, ir], "status": st[iw, ir],
                }


def audit_step(phi: SpectralField, u_coeffs: np.ndarray, nu: float, t: float, r_grid,
               weights: Sequence[Weight], *, tail_threshold: float = TAIL_TOLERANCE) -> FluxReport:
    """Evaluate the flux inequality chain at a single state."""
    grid = phi.grid
    r = np.atleast_1d(np.asarray(r_grid, dtype=float))
    if np.any(r < 0):
        raise ValueError("radii must be nonnegative")
    L = (u_coeffs.shape[-1] - 1) // 2
    a = phi.amplitudes
    p = np.abs(a) ** 2
    norm_sq = float(p.sum())

    skipped = r > grid.max_mode - L
    if float(p[grid.modulus_table >= TAIL_RADIUS * grid.max_mode].sum()) > tail_threshold:
        skipped[:] = True

    rhs = galerkin_rhs(phi, u_coeffs, nu).amplitudes
    lhs_derivative = _tail_sums(grid, 2 * np.real(np.conj(a) * rhs), r)
    lhs_dissipation = _tail_sums(grid, 2 * nu * FOUR_PI_SQ * grid.modulus_sq * p, r)
    rhs_bilinear = bilinear_flux(phi, u_coeffs, r)

    m_t = ShellMeasure(grid.shell_radii, grid.shell_sum(p))
    young = np.empty((len(weights), r.size))
    for i, w in enumerate(weights):
        l1 = weighted_l1_coeffs(u_coeffs, w)
        conv = weight_convolve(m_t, w, r)
        if math.isinf(l1):
            young[i] = np.where(conv > 0, math.inf, 0.0)
        else:
            young[i] = 4 * np.pi * r * l1 * conv
    return FluxReport(t=float(t), r=r, weights=list(weights), lhs_derivative=lhs_derivative,
                      lhs_dissipation=lhs_dissipation, rhs_bilinear=rhs_bilinear, rhs_young=young,
                      tolerance=audit_tolerance(norm_sq, u_coeffs), skipped=skipped)


@dataclass
class AuditSummary:
    """Global minima of the scaled slacks over every audited ``(t, r, weight)``."""

    n_audits: int = 0
    n_pass: int = 0
    n_fail: int = 0
    n_skipped: int = 0
    min_slack_bilinear: float = math.inf
    min_slack_bilinear_at: tuple = ()
    min_slack_young: float = math.inf
    min_slack_young_at: tuple = ()
    max_abs_slack_bilinear: float = 0.0
    reports: list[FluxReport] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.n_fail == 0

    @property
    def equality(self) -> bool:
        """Whether the bilinear layer is tight everywhere (the ``u = 0`` control)."""
        return self.max_abs_slack_bilinear <= EQUALITY_TOLERANCE

    def add(self, rep: FluxReport) -> None:
        self.reports.append(rep)
        self.n_audits += 1
        st = rep.status
        self.n_pass += int(np.sum(st == "pass"))
        self.n_fail += int(np.sum(st == "fail"))
        self.n_skipped += int(np.sum(st == "skipped"))
        live = ~rep.skipped
        if not live.any():
            return
        sb = rep.slack_bilinear / rep.scale
        sy = rep.slack_young / rep.scale
        i = int(np.argmin(np.where(live, sb, math.inf)))
        if sb[i] < self.min_slack_bilinear:
            self.min_slack_bilinear, self.min_slack_bilinear_at = float(sb[i]), (rep.t, float(rep.r[i]))
        self.max_abs_slack_bilinear = max(self.max_abs_slack_bilinear, float(np.max(np.abs(sb[live]))))
        syl = np.where(live[None, :], sy, math.inf)
        iw, ir = np.unravel_index(int(np.argmin(syl)), syl.shape)
        if syl[iw, ir] < self.min_slack_young:
            self.min_slack_young = float(syl[iw, ir])
            self.min_slack_young_at = (rep.t, float(rep.r[ir]), rep.weights[iw].label)

    def as_dict(self) -> dict:
        return {
            "n_audits": self.n_audits, "n_pass": self.n_pass, "n_fail": self.n_fail,
            "n_skipped": self.n_skipped, "passed": self.passed, "equality": self.equality,
            "min_slack_bilinear": self.min_slack_bilinear, "min_slack_bilinear_at": list(self.min_slack_bilinear_at),
            "min_slack_young": self.min_slack_young, "min_slack_young_at": list(self.min_slack_young_at),
            "max_abs_slack_bilinear": self.max_abs_slack_bilinear,
        }

    def to_csv(self, path: str | Path) -> None:
        write_flux_csv(self.reports, path)


def write_flux_csv(reports: Sequence[FluxReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        out.writeheader()
        for rep in reports:
            for row in rep.rows():
                out.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                              for k, v in row.items()})


def audit_trajectory(g: SpectralField, u: VelocityModel, nu: float, T: float, spec: IntegratorSpec, *,
                     cadence: int, r_grid, weights: Sequence[Weight],
                     tail_tolerance: float | None = TAIL_TOLERANCE) -> tuple[AuditSummary, TrajectoryRecord]:
    """Run one trajectory and audit every ``cadence``-th step (including ``t = 0``)."""
    if cadence < 1:
        raise ValueError("cadence must be a positive integer")
    summary = AuditSummary()
    grid = g.grid

    def hook(n: int, t: float, a: np.ndarray) -> None:
        if n % cadence == 0:
            summary.add(audit_step(SpectralField(grid, a), u.coefficients(t), nu, t, r_grid, weights))

    record = run_phi(g, u, nu, T, spec, on_step=hook, tail_tolerance=tail_tolerance)
    return summary, record


def log_radii(lo: float, hi: float, n: int) -> np.ndarray:
    return np.geomspace(lo, hi, n)
