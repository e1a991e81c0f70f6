"""Command-line entry point: ``nlroth <task> [flags]``.

Exit codes: 0 success, 2 invalid configuration, 3 task failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .runner import (TASKS, ConfigError, TaskError, config_from_values, parse_int_list,
                     read_config_file, run_experiment)

EXIT_OK, EXIT_CONFIG, EXIT_TASK = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--config", help="key = value file; flags given on the command line win")
    g.add_argument("--input", help="set file (N1 N2 header, then x y lines)")
    g.add_argument("--output", help="output directory (default .)")
    g.add_argument("--format", choices=("json", "csv"), help="what to echo on stdout")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("-v", "--verbose", action="store_true")

    gen = p.add_argument_group("generator")
    gen.add_argument("--kind", choices=("random_density", "product", "stripe",
                                        "random_phase_triple", "from_file"))
    gen.add_argument("--n1", type=int)
    gen.add_argument("--n2", type=int)
    gen.add_argument("--n", type=int, help="N for random_phase_triple, and the Weyl sum length")
    gen.add_argument("--density", type=float)
    gen.add_argument("--stride", type=int)
    gen.add_argument("--b", type=parse_int_list, help="row factor set, e.g. 1,3")
    gen.add_argument("--c", type=parse_int_list, help="column factor set")

    t = p.add_argument_group("task")
    t.add_argument("--epsilon", type=float)
    t.add_argument("--d-min", type=int)
    t.add_argument("--d-max", type=int)
    t.add_argument("--order", type=int)
    t.add_argument("--q-max", type=int, help="Q for weyl; largest new stride for energy/popdiff")
    t.add_argument("--scale", type=float, help="S for weyl (default n^2)")
    t.add_argument("--alpha", type=float)
    t.add_argument("--beta", type=float)
    t.add_argument("--eta", type=float)
    t.add_argument("--m-shrink", type=float)
    t.add_argument("--max-stages", type=int)


def build_parser() -> argparse.ArgumentParser:
    # argparse itself exits with 2 on malformed flags, matching EXIT_CONFIG
    parser = argparse.ArgumentParser(
        prog="nlroth", description="Counting experiments for (x,y), (x+d,y), (x,y+d^2).")
    sub = parser.add_subparsers(dest="task", required=True)
    helps = {
        "gen": "generate a set or function triple and write it out",
        "count": "configuration counts per difference d",
        "gowers": "U^s sums of the vertical fibers",
        "weyl": "Weyl sum with major-arc certificates",
        "dual": "counting operator and its dual-function identities",
        "energy": "run the energy increment",
        "popdiff": "popular-difference search",
        "verify": "battery of exact checks on a set",
    }
    for task in TASKS:
        _common(sub.add_parser(task, help=helps[task]))
    return parser


def _values(args: argparse.Namespace) -> dict:
    values = read_config_file(args.config) if args.config else {}
    values["task"] = args.task
    flag_map = {"n": "weyl_n"} if args.task == "weyl" else {}
    for key, v in vars(args).items():
        if key in ("config", "task", "verbose") or v is None:
            continue
        values[flag_map.get(key, key)] = v
    if args.task == "weyl" and "n" in values:
        values.setdefault("weyl_n", values.pop("n"))
    return values


def _echo(cfg, report: dict) -> None:
    if cfg.format == "csv":
        sys.stdout.write((Path(cfg.output) / f"{cfg.task}.csv").read_text())
    else:
        sys.stdout.write(json.dumps(report["result"], sort_keys=True) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_values(_values(args))
        report = run_experiment(cfg)
    except ConfigError as exc:
        print(f"nlroth: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TaskError as exc:
        print(f"nlroth: {exc}", file=sys.stderr)
        return EXIT_TASK
    _echo(cfg, report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
