"""``bench run CONFIG`` and ``bench constants --gamma G``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from pavecop.bench.config import ConfigError, parse_config
from pavecop.bench.constants import all_constants
from pavecop.bench.runner import run_experiment

EXIT_OK, EXIT_ERROR, EXIT_ASSERT = 0, 1, 2


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="bench", description="Seeded Monte Carlo checks of the rate constants.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run an experiment config and write CSV reports")
    run.add_argument("config")
    run.add_argument("--out", help="directory for the CSV output")
    run.add_argument("--threads", type=int, default=1)
    const = sub.add_parser("constants", help="print the rate and limit constants for a gamma")
    const.add_argument("--gamma", type=float, required=True)
    args = ap.parse_args(argv)

    if args.cmd == "constants":
        if not 0.0 <= args.gamma <= 1.0:
            print("bench: error: gamma must lie in [0, 1]", file=sys.stderr)
            return EXIT_ERROR
        for key, val in all_constants(args.gamma).items():
            print(f"{key},{'' if val is None else '%.17g' % val}")
        return EXIT_OK

    try:
        cfg = parse_config(Path(args.config).read_text())
        report = run_experiment(cfg, threads=args.threads)
        path = report.write(args.out)
    except (OSError, ConfigError, ValueError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for name, ok, detail in report.checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    print(json.dumps({"csv": str(path), "rows": len(report.rows), "passed": report.passed}))
    return EXIT_OK if report.passed else EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())
