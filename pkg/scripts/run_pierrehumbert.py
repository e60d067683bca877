"""Run the Pierrehumbert ensemble and write its results to a directory.

    python scripts/run_pierrehumbert.py --out runs/ph --set ensemble.M=50
"""
import argparse
import logging
from pathlib import Path

from scalar_cascade import experiment as ex

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "pierrehumbert.cfg"


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(CONFIG))
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.add_argument("--out", default="runs/pierrehumbert")
    p.add_argument("--workers", type=int, default=None)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = ex.ExperimentConfig.from_file(args.config, args.set)
    workers = args.workers or ex.default_workers()
    result = ex.run_ensemble(cfg, workers=workers, out_dir=args.out,
                             progress=lambda n: logging.info("member %d/%d", n, cfg.ensemble.M))
    for key, value in result.summary().items():
        if key != "densities":
            print(f"{key:20s} {value}")
    for note in result.notes:
        print(f"note: {note}")


if __name__ == "__main__":
    main()
