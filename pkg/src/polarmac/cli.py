"""Command line entry point: ``polarmac design`` and ``polarmac simulate``."""

import argparse
import logging
import sys

from .design import design_code
from .simulation import ConfigError, ExperimentConfig, run_experiment, write_results

log = logging.getLogger("polarmac")

EXIT_CONFIG = 2
EXIT_FILE = 3


def _design(args):
    try:
        result = design_code(args.users, args.length, args.info, args.seed)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    try:
        result.save(args.out)
    except OSError as exc:
        log.error("cannot write design: %s", exc)
        return EXIT_FILE
    return 0


def _simulate(args):
    try:
        cfg = ExperimentConfig.load(args.config)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_CONFIG

    def progress(ebn0, frames, frame_errors):
        log.info("Eb/N0 %.2f dB: %d frames, %d frame errors", ebn0, frames, frame_errors)

    try:
        result = run_experiment(cfg, workers=args.workers, progress=progress)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (OSError, ValueError, KeyError) as exc:
        log.error("design file: %s", exc)
        return EXIT_FILE
    try:
        write_results(result, args.out, args.format)
    except OSError as exc:
        log.error("cannot write results: %s", exc)
        return EXIT_FILE
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="polarmac", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="construct frozen sets and write a design file")
    p.add_argument("--users", type=int, required=True, metavar="K")
    p.add_argument("--length", type=int, required=True, metavar="N")
    p.add_argument("--info", type=int, required=True, metavar="k")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="FILE")
    p.set_defaults(func=_design)

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment from a JSON config")
    p.add_argument("--config", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="FILE")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=_simulate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s"
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
