"""Command line entry point: ``ftl2lwr run|converge|entropy --config C --out D``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import harness


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ftl2lwr",
        description="Follow-the-Leader traffic simulation and its LWR continuum limit.")
    parser.add_argument("command", choices=["run", "converge", "entropy"])
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--out", help="output directory (overrides output_dir in the config)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for N sweeps")
    parser.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = harness.ExperimentConfig.from_json(args.config)
        out = args.out or config.output_dir
        if out is None:
            raise harness.ConfigError(["output_dir: pass --out or set output_dir"])
        if args.command == "run":
            report, code = harness.run_single(config, out)
        elif args.command == "converge":
            report, code = harness.run_convergence(config, out, jobs=args.jobs)
        else:
            report, code = harness.run_entropy_suite(config, out, jobs=args.jobs)
    except harness.ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return harness.EXIT_CONFIG
    if not args.quiet:
        print(f"{args.command}: {'PASS' if report['passed'] else 'FAIL'} (exit {code}) -> {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
