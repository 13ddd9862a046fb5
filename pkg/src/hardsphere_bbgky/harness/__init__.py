from .cache import EstimateCache, fingerprint
from .cli import COMMANDS, build_parser, main
from .commands import (
    CommandResult,
    cmd_compare_series,
    cmd_duality,
    cmd_evolve_dual,
    cmd_evolve_state,
    cmd_verify_algebra,
)
from .config import RunConfig, RunConfigError, apply_overrides, build_observable, build_state, load_config, parse_times
from .fixtures import RegressionFixtures, load_points, random_points, state_points
from .output import ResultRow, write_csv, write_manifest
