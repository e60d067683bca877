"""Command-line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 failed invariant,
4 resolution or truncation abort.
"""
import argparse
import csv
import os
import logging
import math
import sys
from pathlib import Path

import numpy as np

from scalar_cascade import experiment as ex
from scalar_cascade import measures as ms
from scalar_cascade.evolution import TruncationError

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_RESOLUTION = 0, 2, 3, 4

log = logging.getLogger("scalar_cascade")


def _load_config(args) -> ex.ExperimentConfig:
    return ex.ExperimentConfig.from_file(args.config, args.set)


def _workers(args, cfg: ex.ExperimentConfig) -> int:
    """Command line beats the environment, which beats the config file."""
    if args.workers:
        return args.workers
    if os.environ.get(ex.WORKERS_ENV):
        return ex.default_workers()
    return cfg.ensemble.workers


def _emit(rows: list[dict], out: str | None, fields: list[str]) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
    finally:
        if out:
            fh.close()


def _fmt(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = args.out or cfg.output.dir or None
    workers = _workers(args, cfg)
    try:
        result = ex.run_ensemble(cfg, workers=workers, out_dir=out,
                                 progress=lambda n: log.info("realization %d/%d done", n, cfg.ensemble.M))
        code = EXIT_OK
    except ex.InvariantError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    s = result.summary()
    print(f"config     {result.config_hash[:16]}")
    print(f"gamma      {_fmt(s['gamma'])}")
    print(f"K          {_fmt(s['K'])}")
    print(f"N0         {_fmt(s['N0'])}")
    print(f"D          {_fmt(s['D'])}")
    print(f"window     [{_fmt(s['window'][0])}, {_fmt(s['window'][1])}]")
    print(f"flux slack {_fmt(s['min_flux_slack'])}")
    print(f"energy     {_fmt(s['energy_residual_max'])}")
    for h, a in s["alpha_star"].items():
        print(f"alpha* (h={float(h):g})  {_fmt(a)}")
    for row in s["densities"]:
        print(f"mu_bad(h={row['h']:g}, alpha={row['alpha']:g}) = {row['mu_bad']:.6g}")
    for note in result.notes:
        print(f"note: {note}")
    if out:
        print(f"results in {out}")
    return code


def cmd_audit(args) -> int:
    path = Path(args.target)
    if path.is_dir():
        cfg = ex.ExperimentConfig.from_file(path / "config.cfg", args.set)
    elif path.is_file():
        cfg = ex.ExperimentConfig.from_file(path, args.set)
    else:
        raise FileNotFoundError(f"{path} is neither a run directory nor a config file")
    if cfg.audit.cadence <= 0:
        cfg.audit.cadence = args.cadence
    summary = ex.run_audit(cfg)
    out = args.out or "flux_audit.csv"
    summary.to_csv(out)
    d = summary.as_dict()
    for key in ("n_audits", "n_pass", "n_fail", "n_skipped", "min_slack_bilinear", "min_slack_young", "equality"):
        print(f"{key:20s} {_fmt(d[key])}")
    print(f"rows in {out}")
    return EXIT_OK if summary.passed else EXIT_INVARIANT


def cmd_spectrum(args) -> int:
    result = ex.load_result(args.run_dir)
    m = result.measure
    rows = []
    for r, mass, se in zip(m.radii, m.masses, m.stderr):
        if mass <= 0:
            continue
        ann = ms.annulus_mass(m, r, args.h)
        rows.append({"radius": r, "mass": mass, "stderr": se, "annulus_mass": ann, "r_mass_over_h": r * ann / args.h})
    _emit(rows, args.out, ["radius", "mass", "stderr", "annulus_mass", "r_mass_over_h"])
    return EXIT_OK


def cmd_density(args) -> int:
    result = ex.load_result(args.run_dir)
    m = result.measure
    a, b = args.window if args.window else result.window
    tail = (result.tail_bound or 0.0) if args.tail_mode == "conservative" else 0.0
    rows, stars = ex.density_rows(m, args.h, args.alpha, (a, b), tail)
    if not rows:
        print(f"empty window [{a:g}, {b:g}]", file=sys.stderr)
        return EXIT_CONFIG
    for row in rows:
        row["alpha_star"] = stars.get(repr(float(row["h"])))
    _emit(rows, args.out, ["h", "alpha", "a", "b", "mu_bad", "mu_overcharged", "alpha_star"])
    return EXIT_OK


def cmd_crosscheck(args) -> int:
    cfg = _load_config(args)
    report = ex.ito_cross_check(cfg, args.forced_M, workers=_workers(args, cfg))
    if report.status == "skipped":
        print("cross-check skipped (forced ensemble size 0)")
        return EXIT_OK
    _emit(list(report.rows()), args.out, ["radius", "unforced", "unforced_se", "forced", "forced_se", "z"])
    print(f"{report.status}: {report.fraction_within:.3f} of shells within 3 pooled standard errors",
          file=sys.stderr)
    return EXIT_OK if report.status == "pass" else EXIT_INVARIANT


def cmd_oracle(args) -> int:
    """Pure diffusion of a single mode against the closed-form time integral."""
    nu = args.nu
    cfg = ex.ExperimentConfig()
    cfg.grid.max_mode = max(8, math.ceil(ex.min_resolution(nu)))
    cfg.physics.nu = nu
    cfg.velocity.kind = "zero"
    decay = 8 * math.pi**2 * nu
    cfg.physics.T = float(math.ceil(14 / decay))
    cfg.validate()
    result = ex.run_ensemble(cfg, workers=1)
    got = result.measure.as_dict()
    want = (1 - math.exp(-decay * cfg.physics.T)) / decay
    err = abs(got.get(1.0, 0.0) / want - 1)
    ok = set(got) == {1.0} and err <= 1e-4
    print(f"shell 1 mass {got.get(1.0, 0.0):.10g} expected {want:.10g} relative error {err:.2e}: "
          f"{'pass' if ok else 'fail'}")
    return EXIT_OK if ok else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scalar-cascade", description="Passive scalar cascade experiments.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", required=True)
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--out", default=None)

    sp = sub.add_parser("simulate", help="run an ensemble and write its results")
    with_config(sp)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("audit", help="flux inequality audit along one trajectory")
    sp.add_argument("target", help="run directory or config file")
    sp.add_argument("--set", action="append", default=[])
    sp.add_argument("--cadence", type=int, default=10)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_audit)

    sp = sub.add_parser("spectrum", help="plot-ready spectrum table of a finished run")
    sp.add_argument("run_dir")
    sp.add_argument("--h", type=float, default=2.0)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_spectrum)

    sp = sub.add_parser("density", help="log densities of undercharged and overcharged radii")
    sp.add_argument("run_dir")
    sp.add_argument("--h", type=float, nargs="+", default=[2.0])
    sp.add_argument("--alpha", type=float, nargs="+", default=[0.01])
    sp.add_argument("--window", type=float, nargs=2, metavar=("A", "B"))
    sp.add_argument("--tail-mode", choices=ex.TAIL_MODES, default="separate")
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_density)

    sp = sub.add_parser("crosscheck", help="forced versus unforced shell masses")
    with_config(sp)
    sp.add_argument("--forced-M", type=int, default=None)
    sp.set_defaults(fn=cmd_crosscheck)

    sp = sub.add_parser("oracle", help="pure-diffusion analytic check")
    sp.add_argument("--nu", type=float, default=1e-3)
    sp.set_defaults(fn=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ms.ResolutionError, TruncationError) as exc:
        print(f"resolution abort: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION
    except ex.InvariantError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
