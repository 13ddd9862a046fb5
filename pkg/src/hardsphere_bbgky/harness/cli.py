import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

from .cache import EstimateCache
from .commands import (
    EXIT_USAGE,
    CommandResult,
    cmd_compare_series,
    cmd_duality,
    cmd_evolve_dual,
    cmd_evolve_state,
    cmd_verify_algebra,
)
from .config import RunConfig, RunConfigError, apply_overrides, load_config, parse_times
from .fixtures import RegressionFixtures, load_points, regression_path
from .output import write_csv, write_manifest
from ..functionals.sequences import DegenerateNormalizationError


logger = logging.getLogger(__name__)


COMMANDS = ("verify-algebra", "evolve-dual", "evolve-state", "duality", "compare-series")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hardsphere-bbgky",
        description="Cumulant expansions of the hard-sphere BBGKY and dual BBGKY hierarchies",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--samples", type=int, help="Monte Carlo samples per estimate")
    parser.add_argument("--nmax", type=int, help="series truncation order")
    parser.add_argument("--times", type=parse_times, help="comma separated evaluation times")
    parser.add_argument("--points", help="JSON file of fixture evaluation points")
    parser.add_argument("--cache-dir", help="reuse Monte Carlo estimates stored in this directory")
    parser.add_argument("--freeze", action="store_true", help="record missing regression values (evolve-dual)")
    parser.add_argument("--corrupt", action="store_true", help="perturb one coefficient to exercise failure reporting")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run_command(name: str, config: RunConfig, args: argparse.Namespace) -> CommandResult:
    cache = EstimateCache(args.cache_dir) if args.cache_dir else None
    if name == "verify-algebra":
        return cmd_verify_algebra(config, corrupt=args.corrupt)
    if name == "evolve-dual":
        points = load_points(Path(args.points) if args.points else (Path(config.points_file) if config.points_file else None))
        regression = RegressionFixtures(regression_path(config.regression_file, config.out, args.freeze))
        return cmd_evolve_dual(config, points, regression, freeze=args.freeze)
    if name == "evolve-state":
        return cmd_evolve_state(config, cache)
    if name == "duality":
        return cmd_duality(config, cache)
    return cmd_compare_series(config, cache)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='[bbgky] %(levelname)s: %(message)s'
    )

    try:
        config = load_config(args.config)
        config = apply_overrides(config, args.seed, args.out, args.samples, args.nmax, args.times)
    except RunConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE

    out_dir = Path(config.out)
    started = time.perf_counter()
    try:
        result = run_command(args.command, config, args)
    except (RunConfigError, DegenerateNormalizationError) as e:
        logger.error(f"{args.command} aborted: {e}")
        return EXIT_USAGE
    elapsed = time.perf_counter() - started

    write_csv(out_dir / f"{args.command}.csv", result.rows)
    write_manifest(
        out_dir / f"{args.command}_manifest.json",
        " ".join(["hardsphere-bbgky"] + list(argv if argv is not None else sys.argv[1:])),
        config.to_dict(),
        result.exit_code,
        {"total_seconds": elapsed},
        result.report,
    )
    if result.exit_code == 0:
        logger.info(f"{args.command} passed in {elapsed:.1f}s")
    else:
        logger.error(f"{args.command} failed with {len(result.report.get('failures', []))} failure(s)")
    return result.exit_code
