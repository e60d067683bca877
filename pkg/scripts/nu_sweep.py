"""Dissipation scale, mixing rate and alpha* across diffusivities.

Each diffusivity gets the smallest power-of-two grid at twice the minimal
resolution, which keeps the 3N/4 tail monitor quiet for these flows.  Prints one row per run.

    python scripts/nu_sweep.py --nu 1e-3 2.5e-4 1e-4 --set ensemble.M=40
"""
import argparse
import math
from pathlib import Path

from scalar_cascade import experiment as ex
from scalar_cascade import measures as ms

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "pierrehumbert.cfg"


def grid_for(nu: float) -> int:
    return max(16, 2 ** math.ceil(math.log2(2 * ex.min_resolution(nu))))


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nu", type=float, nargs="+", default=[1e-3, 2.5e-4, 1e-4])
    p.add_argument("--config", default=str(CONFIG))
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.add_argument("--h", type=float, default=2.0)
    p.add_argument("--window-min", type=float, default=2.0)
    p.add_argument("--workers", type=int, default=None)
    args = p.parse_args()
    print(f"{'nu':>10s} {'N':>5s} {'gamma':>8s} {'D':>8s} {'window':>18s} {'alpha*':>10s}")
    for nu in args.nu:
        cfg = ex.ExperimentConfig.from_file(args.config, args.set + [
            f"physics.nu={nu!r}", f"grid.max_mode={grid_for(nu)}", "audit.cadence=0"])
        cfg.validate()
        records = ex.run_members(cfg, range(cfg.ensemble.M), args.workers or ex.default_workers())
        res = ex.analyse(cfg, records)
        lo, hi = max(res.n_zero, args.window_min), res.dissipation_scale / 2
        star = ms.alpha_star(res.measure, args.h, lo, hi) if lo < hi else float("nan")
        gamma = res.mixing["gamma"] if res.mixing else float("nan")
        print(f"{nu:10.3g} {cfg.grid.max_mode:5d} {gamma:8.4f} {res.dissipation_scale:8.3f} "
              f"{f'[{lo:g}, {hi:g}]':>18s} {star:10.4g}")


if __name__ == "__main__":
    main()
