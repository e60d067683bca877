"""Configuration, seeding, ensemble runs, persistence and the forced/unforced cross-check."""
import configparser
import dataclasses
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, get_type_hints

import numpy as np

from scalar_cascade import measures as ms
from scalar_cascade.evolution import (
    IntegratorSpec,
    TrajectoryRecord,
    n_steps,
    run_forced_oracle,
    run_phi,
)
from scalar_cascade.flux_audit import AuditSummary, audit_trajectory
from scalar_cascade.spectral_core import SpectralField, WaveGrid
from scalar_cascade.velocity_models import (
    Pierrehumbert,
    RandomBandFlow,
    VelocityModel,
    Weight,
    ZeroFlow,
)

WORKERS_ENV = "SCALAR_CASCADE_WORKERS"
VELOCITY_KINDS = ("pierrehumbert", "random_band", "zero")
INITIAL_KINDS = ("single_mode", "random_band")
TAIL_MODES = ("separate", "conservative")
# streams of the seed tree: unforced ensemble, forced velocities, forcing noise
STREAM_UNFORCED, STREAM_FORCED, STREAM_NOISE = 0, 1, 2


class ConfigError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


# -- configuration ---------------------------------------------------------------

@dataclass
class GridSection:
    max_mode: int = 32


@dataclass
class PhysicsSection:
    nu: float = 1e-3
    T: float = 20.0


@dataclass
class VelocitySection:
    kind: str = "pierrehumbert"
    amplitude: float = 1.0
    period: float = 1.0
    band_limit: int = 1
    spectrum_decay: float = 1.0
    knot_interval: float = 0.0625
    random_offset: bool = False


@dataclass
class InitialSection:
    kind: str = "single_mode"
    mode: str = "1,0"
    band: int = 4
    seed: int = 0


@dataclass
class IntegratorSection:
    scheme: str = "exact_shear_map"
    dt: float = 0.03125
    dealias_pad: int = 0


@dataclass
class EnsembleSection:
    M: int = 1
    master_seed: int = 0
    workers: int = 1


@dataclass
class AuditSection:
    cadence: int = 0
    T: float = 0.0
    n_radii: int = 64
    r_min: float = 1.0
    r_max: float = 0.0
    weights: str = "indicator:1, polynomial:2"


@dataclass
class DensitySection:
    h: str = "2"
    alpha: str = "0.01"
    window_min: float = 8.0
    window_max: float = 0.0
    tail_mode: str = "separate"


@dataclass
class CrosscheckSection:
    forced_M: int = 0
    M: int = 0
    T: float = 0.0


@dataclass
class OutputSection:
    dir: str = ""


SECTIONS = {
    "grid": GridSection, "physics": PhysicsSection, "velocity": VelocitySection,
    "initial": InitialSection, "integrator": IntegratorSection, "ensemble": EnsembleSection,
    "audit": AuditSection, "density": DensitySection, "crosscheck": CrosscheckSection,
    "output": OutputSection,
}
# keys that never influence numerical results
_UNHASHED = {("output", "dir"), ("ensemble", "workers")}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(kind: type, text: str) -> Any:
    if kind is bool:
        return _parse_bool(text)
    if kind is int:
        return int(text.strip())
    if kind is float:
        return float(text.strip())
    return text.strip()


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def parse_weights(text: str) -> list[Weight]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        kind, _, param = item.partition(":")
        out.append(Weight(kind.strip(), float(param)))
    return out


@dataclass
class ExperimentConfig:
    """Every input of a run; sections mirror the INI file layout."""

    grid: GridSection = field(default_factory=GridSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    velocity: VelocitySection = field(default_factory=VelocitySection)
    initial: InitialSection = field(default_factory=InitialSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    audit: AuditSection = field(default_factory=AuditSection)
    density: DensitySection = field(default_factory=DensitySection)
    crosscheck: CrosscheckSection = field(default_factory=CrosscheckSection)
    output: OutputSection = field(default_factory=OutputSection)

    # -- io --
    @classmethod
    def from_string(cls, text: str, overrides: Optional[list[str]] = None) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg = cls()
        for section in parser.sections():
            for key, value in parser[section].items():
                cfg.set(f"{section}.{key}", value)
        for item in overrides or []:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} is not of the form section.key=value")
            cfg.set(key.strip(), value)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path, overrides: Optional[list[str]] = None) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_string(text, overrides)

    def set(self, dotted: str, text: str) -> None:
        section, _, key = dotted.partition(".")
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        obj = getattr(self, section)
        hints = get_type_hints(type(obj))
        if key not in hints:
            raise ConfigError(f"unknown config key {dotted!r}")
        try:
            setattr(obj, key, _convert(hints[key], str(text)))
        except ValueError as exc:
            raise ConfigError(f"{dotted}: expected {hints[key].__name__}, got {text!r}") from exc

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for name, section in self.as_dict().items():
            parser[name] = {k: _format(v) for k, v in section.items()}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def config_hash(self) -> str:
        data = {s: {k: v for k, v in sec.items() if (s, k) not in _UNHASHED} for s, sec in self.as_dict().items()}
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()

    # -- validation --
    def validate(self) -> None:
        N, nu = self.grid.max_mode, self.physics.nu
        if N < 1:
            raise ConfigError("grid.max_mode must be >= 1")
        if not nu > 0:
            raise ConfigError("physics.nu must be positive")
        if N < min_resolution(nu):
            raise ConfigError(f"grid.max_mode = {N} violates the resolution rule N >= {min_resolution(nu):.1f}")
        if self.velocity.kind not in VELOCITY_KINDS:
            raise ConfigError(f"velocity.kind must be one of {VELOCITY_KINDS}")
        if self.initial.kind not in INITIAL_KINDS:
            raise ConfigError(f"initial.kind must be one of {INITIAL_KINDS}")
        if self.density.tail_mode not in TAIL_MODES:
            raise ConfigError(f"density.tail_mode must be one of {TAIL_MODES}")
        if self.ensemble.M < 1:
            raise ConfigError("ensemble.M must be >= 1")
        try:
            spec = self.integrator_spec()
            self.h_values(), self.alpha_values(), self.weights(), self.initial_mode()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for name, T in (("physics.T", self.physics.T), ("audit.T", self.audit_T),
                        ("crosscheck.T", self.crosscheck_T)):
            try:
                n_steps(T, spec.dt)
            except ValueError as exc:
                raise ConfigError(f"{name}: {exc}") from exc
            if self.velocity.kind == "pierrehumbert" and not _is_multiple(T, self.velocity.period):
                raise ConfigError(f"{name} = {T} must be an integer multiple of velocity.period")
        if self.velocity.kind == "pierrehumbert" and not _is_multiple(self.velocity.period, 2 * spec.dt):
            raise ConfigError("velocity.period must be a multiple of 2 integrator.dt")
        try:
            spec.check(WaveGrid(N), self.build_velocity(0))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.build_initial()

    # -- derived objects --
    @property
    def audit_T(self) -> float:
        return self.audit.T or self.physics.T

    @property
    def crosscheck_T(self) -> float:
        return self.crosscheck.T or self.physics.T

    def integrator_spec(self) -> IntegratorSpec:
        pad = self.integrator.dealias_pad or None
        return IntegratorSpec(scheme=self.integrator.scheme, dt=self.integrator.dt, dealias_pad=pad)

    def initial_mode(self) -> tuple[int, int]:
        parts = [int(x) for x in self.initial.mode.split(",")]
        if len(parts) != 2 or parts == [0, 0]:
            raise ValueError("initial.mode must be a nonzero wavevector 'k1,k2'")
        return parts[0], parts[1]

    def build_initial(self) -> SpectralField:
        grid = WaveGrid(self.grid.max_mode)
        if self.initial.kind == "single_mode":
            k = self.initial_mode()
            if max(abs(k[0]), abs(k[1])) > grid.max_mode:
                raise ConfigError("initial.mode lies outside the grid")
            return SpectralField.from_modes(grid, {k: 1 / math.sqrt(2)})
        if not 1 <= self.initial.band <= grid.max_mode:
            raise ConfigError("initial.band must lie in [1, max_mode]")
        rng = np.random.default_rng(self.initial.seed)
        return SpectralField.random(grid, rng, band=self.initial.band)

    def build_velocity(self, seed: int) -> VelocityModel:
        v = self.velocity
        try:
            if v.kind == "zero":
                return ZeroFlow()
            if v.kind == "pierrehumbert":
                steps = round(v.period / self.integrator.dt) if v.random_offset else 0
                return Pierrehumbert(amplitude=v.amplitude, period=v.period, seed=seed, offset_steps=steps)
            return RandomBandFlow(band_limit=v.band_limit, spectrum_decay=v.spectrum_decay, seed=seed,
                                  amplitude=v.amplitude, knot_interval=v.knot_interval)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def weights(self) -> list[Weight]:
        return parse_weights(self.audit.weights)

    def h_values(self) -> list[float]:
        hs = _float_list(self.density.h)
        if not hs or min(hs) <= 0:
            raise ValueError("density.h must list positive widths")
        return hs

    def alpha_values(self) -> list[float]:
        alphas = _float_list(self.density.alpha)
        if min(alphas, default=1.0) <= 0:
            raise ValueError("density.alpha must list positive levels")
        return alphas

    def audit_radii(self) -> np.ndarray:
        hi = self.audit.r_max or float(self.grid.max_mode - self.build_velocity(0).band_limit)
        return np.geomspace(self.audit.r_min, hi, self.audit.n_radii)


def _is_multiple(x: float, unit: float) -> bool:
    ratio = x / unit
    return round(ratio) >= 1 and abs(ratio - round(ratio)) < 1e-9


def min_resolution(nu: float) -> float:
    """Smallest grid half-width placing the diffusive cutoff ``nu^-1/2 / (2 pi)`` at ``N / 4``."""
    return 4 * nu ** -0.5 / (2 * math.pi)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


# -- seeding -------------------------------------------------------------------

def derive_seed(master: int, index: int, stream: int = STREAM_UNFORCED) -> int:
    """64-bit seed of realization ``index``; adding realizations never perturbs existing ones."""
    words = np.random.SeedSequence(master, spawn_key=(stream, index)).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


# -- ensemble ------------------------------------------------------------------

def _run_member(args: tuple) -> TrajectoryRecord:
    cfg, index = args
    seed = derive_seed(cfg.ensemble.master_seed, index)
    spec = cfg.integrator_spec()
    steps = n_steps(cfg.physics.T, spec.dt)
    rec = run_phi(cfg.build_initial(), cfg.build_velocity(seed), cfg.physics.nu, cfg.physics.T, spec,
                  sample_every=steps, keep_final=False)
    rec.meta.update(law=cfg.config_hash(), index=index, seed=seed)
    return rec


def run_members(cfg: ExperimentConfig, indices, workers: int = 1,
                progress: Optional[Callable[[int], None]] = None) -> list[TrajectoryRecord]:
    """Trajectories for ``indices``, returned in index order whatever the worker count."""
    jobs = [(cfg, i) for i in indices]
    if workers <= 1:
        out = []
        for job in jobs:
            out.append(_run_member(job))
            if progress:
                progress(len(out))
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_member, jobs))


@dataclass
class RunResult:
    """Everything a run reports; serialises losslessly to JSON."""

    config_hash: str
    config: dict
    radii: list
    mass: list
    stderr: list
    tail_bound: Optional[float]
    mixing: Optional[dict]
    n_zero: float
    dissipation_scale: Optional[float]
    window: list
    densities: list
    alpha_star: dict
    cumulative_R: list
    cumulative_mass: list
    log_growth: Optional[dict]
    energy_residual_max: float
    flux: Optional[dict]
    notes: list = field(default_factory=list)

    @property
    def measure(self) -> ms.ShellMeasure:
        return ms.ShellMeasure(np.array(self.radii), np.array(self.mass), np.array(self.stderr))

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunResult":
        return cls(**json.loads(text))

    def summary(self) -> dict:
        return {
            "nu": self.config["physics"]["nu"], "T": self.config["physics"]["T"],
            "ensemble_size": self.config["ensemble"]["M"],
            "K": None if self.mixing is None else self.mixing["K"],
            "gamma": None if self.mixing is None else self.mixing["gamma"],
            "N0": self.n_zero, "D": self.dissipation_scale, "window": self.window,
            "alpha_star": self.alpha_star, "densities": self.densities,
            "min_flux_slack": None if self.flux is None else min(self.flux["min_slack_bilinear"],
                                                                  self.flux["min_slack_young"]),
            "energy_residual_max": self.energy_residual_max,
        }


def _floats(a) -> list:
    return [float(x) for x in np.asarray(a).ravel()]


def density_rows(m: ms.ShellMeasure, h_values, alpha_values, window: tuple[float, float],
                 tail: float = 0.0) -> tuple[list[dict], dict]:
    """Bad and overcharged log densities per ``(h, alpha)`` on ``window``, plus ``alpha*`` per ``h``."""
    a, b = window
    rows, stars = [], {}
    if not a < b:
        return rows, {repr(float(h)): None for h in h_values}
    for h in h_values:
        stars[repr(float(h))] = ms.alpha_star(m, h, a, b) if tail == 0 else None
        for alpha in alpha_values:
            bad = ms.log_density(ms.bad_set_intervals(m, h, alpha, a, b, tail=tail), a, b)
            over = ms.log_density(ms.overcharged_set_intervals(m, h, alpha, a, b, tail=tail), a, b)
            rows.append({"h": float(h), "alpha": float(alpha), "a": a, "b": b, "mu_bad": bad, "mu_overcharged": over})
    return rows, stars


def analyse(cfg: ExperimentConfig, records: list[TrajectoryRecord], flux: Optional[AuditSummary] = None) -> RunResult:
    notes = []
    residuals = [abs(rec.energy_residual) for rec in records]
    try:
        fit = ms.fit_mixing(records)
    except ms.MixingError as exc:
        fit = None
        notes.append(f"mixing fit unavailable: {exc}")
    est = ms.estimate_mass_measure(records, fit=fit)
    m = est.measure
    g = cfg.build_initial()
    N0 = ms.n_zero(g)
    D = ms.dissipation_scale(records)
    lo = max(N0, cfg.density.window_min)
    hi = cfg.density.window_max or D / 2
    if not lo < hi:
        notes.append(f"reporting window [{lo:g}, {hi:g}] is empty")
    tail = (est.tail_bound or 0.0) if cfg.density.tail_mode == "conservative" else 0.0
    rows, stars = density_rows(m, cfg.h_values(), cfg.alpha_values(), (lo, hi), tail)
    R, cum = ms.cumulative_table(m)
    growth = None
    if lo < hi:
        lg = ms.log_growth_fit(m, lo, hi)
        growth = {"slope": lg.slope, "intercept": lg.intercept, "relative_residual": lg.relative_residual,
                  "R": _floats(lg.radii), "cumulative": _floats(lg.cumulative),
                  "doubling_ratios": _floats(lg.doubling_ratios)}
    mixing = None if fit is None else {"K": fit.K, "gamma": fit.gamma, "residual": fit.residual,
                                       "window": list(fit.window)}
    return RunResult(
        config_hash=cfg.config_hash(), config=cfg.as_dict(), radii=_floats(m.radii), mass=_floats(m.masses),
        stderr=_floats(m.stderr), tail_bound=est.tail_bound, mixing=mixing, n_zero=N0,
        dissipation_scale=D, window=[lo, hi], densities=rows, alpha_star=stars,
        cumulative_R=_floats(R), cumulative_mass=_floats(cum), log_growth=growth,
        energy_residual_max=max(residuals), flux=None if flux is None else flux.as_dict(), notes=notes,
    )


ENERGY_TOLERANCE = 1e-6


def run_audit(cfg: ExperimentConfig) -> AuditSummary:
    """Flux audit along realization 0 over ``audit.T``."""
    seed = derive_seed(cfg.ensemble.master_seed, 0)
    cadence = cfg.audit.cadence or n_steps(cfg.audit_T, cfg.integrator.dt) + 1
    summary, _ = audit_trajectory(cfg.build_initial(), cfg.build_velocity(seed), cfg.physics.nu, cfg.audit_T,
                                  cfg.integrator_spec(), cadence=cadence, r_grid=cfg.audit_radii(),
                                  weights=cfg.weights())
    return summary


def run_ensemble(cfg: ExperimentConfig, *, workers: Optional[int] = None, out_dir: str | Path | None = None,
                 progress: Optional[Callable[[int], None]] = None) -> RunResult:
    """Run the configured ensemble, reduce it and (optionally) persist the results.

    Raises :class:`InvariantError` when a member violates the energy identity
    or the flux audit fails; the result is still written first.
    """
    workers = cfg.ensemble.workers if workers is None else workers
    records = run_members(cfg, range(cfg.ensemble.M), workers, progress)
    flux = run_audit(cfg) if cfg.audit.cadence > 0 else None
    result = analyse(cfg, records, flux)
    out_dir = out_dir or cfg.output.dir or None
    if out_dir:
        persist(result, cfg, out_dir, flux)
    if result.energy_residual_max > ENERGY_TOLERANCE:
        raise InvariantError(f"energy identity violated by {result.energy_residual_max:.3e}")
    if flux is not None and not flux.passed:
        raise InvariantError(f"flux audit failed at {flux.n_fail} points")
    return result


def persist(result: RunResult, cfg: ExperimentConfig, out_dir: str | Path,
            flux: Optional[AuditSummary] = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(cfg.to_ini())
    m = result.measure
    keep = m.masses > 0
    ms.ShellMeasure(m.radii[keep], m.masses[keep], m.stderr[keep]).to_csv(out / "spectrum.csv")
    with open(out / "cumulative.csv", "w") as fh:
        fh.write("R,log_R,cumulative_mass\n")
        for R, c in zip(result.cumulative_R, result.cumulative_mass):
            fh.write(f"{R!r},{math.log(R)!r},{c!r}\n")
    write_density_csv(result.densities, result.alpha_star, out / "density_report.csv")
    if flux is not None:
        flux.to_csv(out / "flux_audit.csv")
    (out / "summary.json").write_text(result.to_json())
    return out


def write_density_csv(rows: list[dict], stars: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("h,alpha,a,b,mu_bad,mu_overcharged,alpha_star\n")
        for row in rows:
            star = stars.get(repr(float(row["h"])))
            fh.write(",".join(repr(float(row[k])) for k in ("h", "alpha", "a", "b", "mu_bad", "mu_overcharged"))
                     + f",{'' if star is None else repr(star)}\n")


def load_result(run_dir: str | Path) -> RunResult:
    path = Path(run_dir) / "summary.json"
    if not path.is_file():
        raise FileNotFoundError(f"no run results at {run_dir}")
    return RunResult.from_json(path.read_text())


# -- forced versus unforced ------------------------------------------------------

@dataclass
class CrossCheck:
    status: str
    radii: list = field(default_factory=list)
    unforced: list = field(default_factory=list)
    unforced_se: list = field(default_factory=list)
    forced: list = field(default_factory=list)
    forced_se: list = field(default_factory=list)
    z: list = field(default_factory=list)
    fraction_within: float = math.nan

    def rows(self):
        for row in zip(self.radii, self.unforced, self.unforced_se, self.forced, self.forced_se, self.z):
            yield dict(zip(("radius", "unforced", "unforced_se", "forced", "forced_se", "z"), row))


def _forced_member(args: tuple) -> np.ndarray:
    cfg, j, T = args
    master = cfg.ensemble.master_seed
    u = cfg.build_velocity(derive_seed(master, j, STREAM_FORCED))
    period = cfg.velocity.period if cfg.velocity.kind == "pierrehumbert" else None
    psi = run_forced_oracle(cfg.build_initial(), u, cfg.physics.nu, T, cfg.integrator_spec(),
                            derive_seed(master, j, STREAM_NOISE), period=period)
    return psi.grid.shell_sum(np.abs(psi.amplitudes) ** 2)


def _unforced_member(args: tuple) -> np.ndarray:
    cfg, i, T = args
    u = cfg.build_velocity(derive_seed(cfg.ensemble.master_seed, i))
    rec = run_phi(cfg.build_initial(), u, cfg.physics.nu, T, cfg.integrator_spec(),
                  sample_every=n_steps(T, cfg.integrator.dt), keep_final=False)
    return rec.mass_integral_left


def ito_cross_check(cfg: ExperimentConfig, forced_M: Optional[int] = None, *, M: Optional[int] = None,
                    workers: int = 1, occupied: float = 1e-8, z_max: float = 3.0) -> CrossCheck:
    """Compare forced second moments at ``T`` with the unforced time integral over ``[0, T]``.

    The unforced side uses the left Riemann sum, which is what Euler-Maruyama
    forcing reproduces exactly when the velocity law is invariant under shifts
    by ``dt``.  Shells whose unforced mass is below ``occupied`` times the
    largest shell are ignored.
    """
    forced_M = cfg.crosscheck.forced_M if forced_M is None else forced_M
    if forced_M <= 0:
        return CrossCheck(status="skipped")
    M = M or cfg.crosscheck.M or cfg.ensemble.M
    T = cfg.crosscheck_T
    if cfg.velocity.kind == "pierrehumbert" and not cfg.velocity.random_offset:
        raise ConfigError("the cross-check needs velocity.random_offset = true for a shift-invariant law")
    un = np.array(_map(_unforced_member, [(cfg, i, T) for i in range(M)], workers))
    fo = np.array(_map(_forced_member, [(cfg, j, T) for j in range(forced_M)], workers))
    mu, su = ms._mean_and_stderr(un)
    mf, sf = ms._mean_and_stderr(fo)
    radii = WaveGrid(cfg.grid.max_mode).shell_radii
    keep = mu > occupied * mu.max()
    pooled = np.sqrt(su**2 + sf**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(pooled > 0, (mf - mu) / pooled, 0.0)
    frac = float(np.mean(np.abs(z[keep]) <= z_max))
    return CrossCheck(status="pass" if frac >= 0.95 else "fail", radii=_floats(radii[keep]),
                      unforced=_floats(mu[keep]), unforced_se=_floats(su[keep]), forced=_floats(mf[keep]),
                      forced_se=_floats(sf[keep]), z=_floats(z[keep]), fraction_within=frac)


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))
