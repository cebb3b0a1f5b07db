"""Command-line entry point: ``ergolab <experiment> [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import EXPERIMENTS, validate_config
from .errors import ErgolabError
from .experiments import run

log = logging.getLogger("ergolab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergolab",
                                     description="Random-times weighted ergodic average experiments.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (flags override it)")
    common.add_argument("--alpha", type=float)
    common.add_argument("--rho", type=float)
    common.add_argument("--nmax", type=int, dest="n_max")
    common.add_argument("--nmin", type=int, dest="n_min")
    common.add_argument("--seed", type=int, dest="master_seed")
    common.add_argument("--trials", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help='output path, "-" for stdout')
    common.add_argument("--net", dest="net_file", help="net CSV to check (net-check only)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {k: getattr(args, k) for k in ("alpha", "rho", "n_max", "n_min", "master_seed",
                                                "trials", "threads", "out", "net_file")}
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = validate_config(text, experiment=args.experiment, **overrides)
        run(cfg)
    except ErgolabError as exc:
        print(f"ergolab: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ergolab: I/O error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
