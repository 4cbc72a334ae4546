# -*- coding: utf-8 -*-
"""
command line entry ``hamlag {run,converge,compare,timing,selftest}``
"""

import os
import sys
import logging
import argparse

from hamlag.exceptions import HamlagException
from hamlag.harness import (
    ExperimentConfig,
    compare_schemes,
    convergence_study,
    grid_timing_study,
    run_all,
)
from hamlag.record import emit_csv

logger = logging.getLogger(__name__)


def get_parser():
    parser = argparse.ArgumentParser(
        prog="hamlag",
        description="energy-preserving integrators for Hamiltonian PDEs",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "run every configured scheme from 0 to T"),
        ("converge", "temporal convergence table over the Δt ladder"),
        ("compare", "drift, iteration and timing comparison of the schemes"),
        ("timing", "wall time per scheme while the grid is refined"),
    ):
        p = sub.add_parser(name, help=text, parents=[common])
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", help="output directory, overrides the config")
        p.add_argument(
            "--scheme", action="append", help="scheme id, overrides the config schemes"
        )
        if name == "timing":
            p.add_argument(
                "--n", action="append", type=int, help="points per axis, repeat for more grids"
            )
    p = sub.add_parser("selftest", help="run the invariant suites", parents=[common])
    p.add_argument("--out", help="output directory for selftest.csv")
    p.add_argument("--seed", type=int, default=0)
    return parser


def load_config(args):
    cfg = ExperimentConfig.from_json(args.config)
    if args.out is not None:
        cfg.out = args.out
    if args.scheme:
        cfg.schemes = [cfg.parse_scheme(s) for s in args.scheme]
    return cfg


def main(argv=None):
    """
    :param argv: Optional[list of str], default sys.argv[1:]
    :return: int, exit status, 0 on success, 1 on a failed experiment, 2 on failed self checks
    """
    args = get_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    logging.captureWarnings(True)
    try:
        if args.command == "selftest":
            # imported here, the suites build their own experiments
            from hamlag.selftest import selftest

            table = selftest(seed=args.seed)
            if args.out is not None:
                os.makedirs(args.out, exist_ok=True)
                emit_csv(table, os.path.join(args.out, "selftest.csv"))
            return 0 if bool(table["passed"].all()) else 2
        cfg = load_config(args)
        if args.command == "run":
            run_all(cfg)
        elif args.command == "converge":
            convergence_study(cfg)
        elif args.command == "compare":
            compare_schemes(cfg)
        elif args.command == "timing":
            grid_timing_study(cfg, args.n)
    except HamlagException as e:
        print("hamlag %s: %s: %s" % (args.command, type(e).__name__, e), file=sys.stderr)
        return 1
    return 0
