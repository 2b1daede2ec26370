"""``sim`` command line entry point."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

import numpy as np

from .config import ConfigError, default_config, load_config
from .fitting import FitError
from .scenarios import FIGURES, RUNNERS, figure_config, run_scenario
from .steadystate import SteadyStateError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
log = logging.getLogger("rydmirror")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=None, help="worker threads")
    p.add_argument("--band", action="store_true", help="histogram: also emit per-bin mean/sd bands")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim", description="Rydberg-switched atomic mirror simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        sp.add_argument("--config", default=None, help="YAML configuration file")
        _common(sp)
    rp = sub.add_parser("reproduce", help="run the scenario behind a figure with pinned defaults")
    rp.add_argument("--figure", required=True, choices=list(FIGURES))
    _common(rp)
    sub.add_parser("defaults", help="print the default configuration as YAML")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "defaults":
        sys.stdout.write(default_config().to_yaml())
        return EXIT_OK
    try:
        if args.command == "reproduce":
            scenario, cfg = figure_config(args.figure)
        else:
            scenario = args.command
            cfg = load_config(args.config) if args.config else default_config()
        with np.errstate(all="ignore"):
            res = run_scenario(cfg, scenario, args.out, args.seed, args.threads, args.band)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SteadyStateError, FitError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for f in res.files:
        log.info("wrote %s", f)
    print(f"{scenario}: wrote {len(res.files)} files to {res.files[-1].parent}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
