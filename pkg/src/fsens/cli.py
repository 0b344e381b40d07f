"""Command line: ``fsens run|sweep|surrogate|validate <config.json>``.

Exit codes are 0 on success, 2 for configuration errors and 3 for numerical
or model failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from . import runner
from .divergences import DivergenceError
from .estimators import EstimationError
from .functions import ModelError
from .inputs import InputModelError
from .kde import KdeError
from .oracle import OracleError
from .pdd import PddError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("fsens")


def _float_list(text: str) -> list[int]:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not values or any(v < 2 or v != int(v) for v in values):
        raise argparse.ArgumentTypeError("sample sizes must be integers >= 2")
    return [int(v) for v in values]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fsens", description="f-sensitivity indices from a JSON config")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="estimate indices and write report.csv / report.json")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides output.dir)")

    s = sub.add_parser("sweep", help="convergence sweep over sample sizes")
    s.add_argument("config")
    s.add_argument("--L", type=_float_list, help="sample sizes, e.g. 1e3,1e4,1e5")
    s.add_argument("--replicates", type=int, help="replicates per sample size (seed substreams)")
    s.add_argument("--out", help="output directory (overrides output.dir)")

    g = sub.add_parser("surrogate", help="build a PDD surrogate and save it as JSON")
    g.add_argument("config")
    g.add_argument("--out", required=True, help="surrogate JSON path")

    v = sub.add_parser("validate", help="check a config without computing")
    v.add_argument("config")
    return p


def _load(path: str, out: str | None = None) -> cfgmod.RunConfig:
    raw = cfgmod.load(path)
    cfg = cfgmod.parse(raw, Path(path).resolve().parent)
    if out:
        cfg.out_dir = Path(out)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load(args.config, getattr(args, "out", None) if args.verb != "surrogate" else None)
        if args.verb == "validate":
            print(f"{args.config}: ok ({cfg.method}, {len(cfg.subsets)} subsets, "
                  f"{len(cfg.divergences)} divergences)")
        elif args.verb == "run":
            report = runner.run(cfg)
            print(f"wrote {cfg.out_dir / 'report.csv'} and {cfg.out_dir / 'report.json'}")
            for div, order in report.rankings.items():
                print(f"{div}: " + " > ".join("X" + cfgmod.subset_key(u) for u in order))
        elif args.verb == "sweep":
            if args.replicates is not None and args.replicates < 1:
                raise cfgmod.ConfigError("--replicates", "must be at least 1")
            runner.sweep(cfg, args.L, args.replicates)
            print(f"wrote sweep.csv, summary.csv and plot_data.csv in {cfg.out_dir}")
        elif args.verb == "surrogate":
            if cfg.method != "pdd_kde_mc" and "pdd" not in cfg.raw:
                raise cfgmod.ConfigError("pdd", "a pdd section is required to build a surrogate")
            surrogate = runner.build_surrogate(cfg)
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(surrogate.to_json() + "\n")
            print(f"wrote {args.out} ({len(surrogate.coefficients)} terms, "
                  f"{surrogate.model_evals} model evaluations)")
    except (cfgmod.ConfigError, InputModelError, DivergenceError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EstimationError, KdeError, PddError, OracleError, ModelError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
