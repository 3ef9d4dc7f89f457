"""Command line: ``risscat run | sweep | impedance-dump``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .scenario import COUPLINGS, ScenarioError, load_scenario, with_overrides

log = logging.getLogger("risscat")


def _add_overrides(p):
    p.add_argument("--grid-step", type=float, metavar="DEG", help="angular grid step in degrees")
    p.add_argument("--coupling", choices=COUPLINGS, help="RIS coupling used for evaluation")
    p.add_argument("--out-dir", type=Path, metavar="DIR", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="risscat", description=__doc__)
    ap.add_argument("--version", action="version", version=f"risscat {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="optimize and evaluate one scenario")
    p.add_argument("scenario", type=Path)
    _add_overrides(p)

    p = sub.add_parser("sweep", help="run several scenarios and tabulate their lobes")
    p.add_argument("scenarios", type=Path, nargs="+")
    _add_overrides(p)
    p.add_argument("--table", default="sweep.csv",
                   help="comparison table file name, placed in --out-dir (default: %(default)s)")

    p = sub.add_parser("impedance-dump", help="write the assembled impedance set as JSON")
    p.add_argument("scenario", type=Path)
    _add_overrides(p)
    return ap


def _load(path, args, sub_dir=None):
    cfg = load_scenario(path)
    out = args.out_dir
    if out is not None and sub_dir is not None:
        out = out / sub_dir
    return with_overrides(cfg, grid_step=args.grid_step, coupling=args.coupling, out_dir=out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    # deferred so that --help stays fast
    from .pipeline import SweepError, run_scenario, run_sweep, write_impedance_dump

    try:
        if args.command == "run":
            res = run_scenario(_load(args.scenario, args))
            for kind, path in res.paths.items():
                print(f"{kind}: {path}")
        elif args.command == "sweep":
            cfgs = []
            for path in args.scenarios:
                cfg = load_scenario(path)
                # each scenario writes into its own subdirectory of --out-dir
                sub = cfg.name if args.out_dir is not None else None
                cfgs.append(_load(path, args, sub))
            names = [c.name for c in cfgs]
            if args.out_dir is not None and len(set(names)) != len(names):
                raise ScenarioError(["name: scenario names must be unique within a sweep"])
            root = args.out_dir if args.out_dir is not None else Path(".")
            table = root / args.table
            run_sweep(cfgs, table)
            print(f"table: {table}")
        else:
            path = write_impedance_dump(_load(args.scenario, args))
            print(f"impedance: {path}")
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, SweepError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
