import csv
import json
from pathlib import Path

import pytest

from hardsphere_bbgky.harness import cli
from hardsphere_bbgky.harness.cache import EstimateCache, fingerprint
from hardsphere_bbgky.harness.commands import (
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_USAGE,
    cmd_compare_series,
    cmd_duality,
    cmd_evolve_dual,
    cmd_evolve_state,
)
from hardsphere_bbgky.harness.config import (
    RunConfig,
    RunConfigError,
    apply_overrides,
    build_observable,
    build_state,
    load_config,
    parse_times,
)
from hardsphere_bbgky.harness.fixtures import (
    DEFAULT_POINTS_FILE,
    DEFAULT_VALUES_FILE,
    RegressionFixtures,
    load_points,
    random_points,
    regression_path,
    state_points,
)
from hardsphere_bbgky.harness.output import CSV_COLUMNS, ResultRow, write_csv, write_manifest


def write_config(tmp_path, **values):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(values), encoding="utf-8")
    return path


def test_defaults_match_resource_file():
    assert load_config(str(DEFAULT_POINTS_FILE.parents[1] / "default_config.json")).to_dict() == RunConfig().to_dict()


def test_unknown_keys_rejected():
    with pytest.raises(RunConfigError, match="unknown config keys: n_maximum"):
        RunConfig.from_dict({"n_maximum": 3})


def test_nested_sections_merge_over_defaults():
    config = RunConfig.from_dict({"initial_observable": {"kind": "number"}, "sampling": {"chunk_size": 50}})
    assert config.initial_observable["kind"] == "number"
    assert config.initial_observable["radius_q"] == 2.0
    assert config.sampling["position_law"] == "normal"
    assert config.sampling_spec().chunk_size == 50


@pytest.mark.parametrize(
    "values",
    [
        {"N_max": 0},
        {"times": []},
        {"s_values": [5]},
        {"routes": []},
        {"routes": ["cumulant", "sideways"]},
        {"initial_observable": {"kind": "entropy"}},
        {"initial_state": {"n_particles": 9}},
        {"sampling": {"position_law": "cubic"}},
        {"sampling": "normal"},
        {"seed": -1},
    ],
)
def test_invalid_configs(values):
    with pytest.raises(RunConfigError):
        RunConfig.from_dict(values)


def test_convergence_warnings(caplog):
    RunConfig(gamma=0.5, alpha=2.0)
    messages = " ".join(record.getMessage() for record in caplog.records)
    assert "gamma=0.5" in messages
    assert "alpha=2.0" in messages


def test_load_config_errors(tmp_path):
    with pytest.raises(RunConfigError):
        load_config(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(RunConfigError):
        load_config(str(broken))
    listed = tmp_path / "listed.json"
    listed.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(RunConfigError):
        load_config(str(listed))


def test_overrides_and_times():
    config = apply_overrides(RunConfig(), seed=7, samples=100, nmax=1, times=parse_times("0.25, 1.5,"))
    assert (config.seed, config.n_samples, config.n_max) == (7, 100, 1)
    assert config.times == [0.25, 1.5]
    with pytest.raises(RunConfigError):
        parse_times("0.1,later")
    with pytest.raises(RunConfigError):
        apply_overrides(RunConfig(), samples=1)


def test_built_sequences():
    config = RunConfig(N_max=3)
    assert build_observable(config).n_max == 3
    kary = RunConfig.from_dict(
        {"N_max": 2, "s_values": [1, 2], "initial_state": {"n_particles": 2}, "initial_observable": {"kind": "kary", "k": 3}}
    )
    with pytest.raises(RunConfigError):
        build_observable(kary)
    state = build_state(config)
    assert state.component(3) is not None
    assert state.component(2) is None


def test_fingerprint_is_stable():
    config = RunConfig().to_dict()
    key = fingerprint("evolve-state", config, 1, s=1, t=0.5)
    assert key == fingerprint("evolve-state", dict(reversed(list(config.items()))), 1, t=0.5, s=1)
    assert key != fingerprint("evolve-state", config, 2, s=1, t=0.5)
    assert key != fingerprint("duality", config, 1, s=1, t=0.5)


def test_estimate_cache(tmp_path):
    cache = EstimateCache(str(tmp_path / "cache"))
    assert cache.get("missing") is None
    cache.put("a", "duality", {"rows": [], "details": {"value": 0.1}})
    cache.put("b", "duality", {"rows": [], "details": {}})
    cache.put("c", "evolve-state", {"rows": [], "details": {}})
    assert cache.get("a") == {"rows": [], "details": {"value": 0.1}}
    stats = cache.get_cache_stats()
    assert stats["total_estimates"] == 3
    assert stats["per_quantity"] == {"duality": 2, "evolve-state": 1}
    assert EstimateCache(str(tmp_path / "cache")).get("c") is not None
    cache.clear_all()
    assert cache.get_cache_stats()["total_estimates"] == 0


def test_regression_fixtures(tmp_path):
    path = tmp_path / "values.json"
    fixtures = RegressionFixtures(path)
    key = RegressionFixtures.key("general", 2, 0.5, "fix-head-on")
    assert key == "general|s=2|t=0.5|fix-head-on"
    assert fixtures.check(key, 1.0) is None
    fixtures.freeze(key, 1.25)
    fixtures.save()
    reloaded = RegressionFixtures(path)
    assert reloaded.check(key, 1.25 + 1e-12) is True
    assert reloaded.check(key, 1.25 + 1e-6) is False


def test_unreadable_regression_file(tmp_path):
    path = tmp_path / "values.json"
    path.write_text("not json", encoding="utf-8")
    assert RegressionFixtures(path).values == {}


def test_fixture_points():
    grouped = load_points()
    assert sorted(grouped) == [1, 2, 3]
    assert all(point_id.startswith("fix-") for points in grouped.values() for point_id, _ in points)
    assert all(point.is_allowed() for points in grouped.values() for _, point in points)
    assert load_points(DEFAULT_POINTS_FILE.parent / "absent.json") == {}


def test_random_and_state_points(spec):
    first = random_points(3, 4, seed=5)
    again = random_points(3, 4, seed=5)
    assert [point_id for point_id, _ in first] == [f"rand-s3-{i}" for i in range(4)]
    for (_, a), (_, b) in zip(first, again):
        assert (a.positions == b.positions).all()
        assert a.is_allowed()
    drawn = state_points(2, 3, spec, seed=5)
    assert len(drawn) == 3
    assert all(point.n == 2 and point.is_allowed() for _, point in drawn)


def test_csv_and_manifest(tmp_path):
    rows = [ResultRow(1, 0.1, "fix-rest", "cumulant", 1 / 3, 0.0, 0, 9), ResultRow(2, 0.5, "rand-s2-0", "direct", -2.5e-17)]
    path = write_csv(tmp_path / "out" / "rows.csv", rows)
    with open(path, newline="", encoding="utf-8") as f:
        table = list(csv.reader(f))
    assert table[0] == CSV_COLUMNS
    assert table[1] == ["1", "0.1", "fix-rest", "cumulant", repr(1 / 3), "0.0", "0", "9"]
    assert float(table[2][4]) == -2.5e-17

    manifest_path = write_manifest(tmp_path / "out" / "m.json", "hardsphere-bbgky duality", {"seed": 9}, 1, {"total_seconds": 0.5})
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    assert manifest["passed"] is False
    assert manifest["config"] == {"seed": 9}
    assert {"hardsphere_bbgky", "python", "numpy", "scipy"} <= set(manifest["versions"])
    assert not [p for p in (tmp_path / "out").iterdir() if p.name.startswith(".")]


def test_evolve_dual_freezes_and_checks(small_config, tmp_path):
    config = RunConfig.from_dict(
        {**small_config.to_dict(), "initial_observable": {"kind": "number"}, "times": [0.3], "routes": ["cumulant", "reduced"]}
    )
    fixtures = load_points()
    regression = RegressionFixtures(tmp_path / "values.json")
    first = cmd_evolve_dual(config, fixtures, regression, freeze=True)
    assert first.exit_code == EXIT_OK
    assert first.report["frozen"] == len(fixtures[1]) + len(fixtures[2])
    assert (tmp_path / "values.json").exists()

    stored = RegressionFixtures(tmp_path / "values.json")
    assert cmd_evolve_dual(config, fixtures, stored).exit_code == EXIT_OK
    key = next(iter(stored.values))
    stored.values[key] += 0.5
    changed = cmd_evolve_dual(config, fixtures, stored)
    assert changed.exit_code == EXIT_FAILURE
    assert any(key in failure for failure in changed.report["failures"])


@pytest.mark.parametrize("kind, checked", [("additive", 3), ("number", 4)])
def test_shipped_regression_values_are_enforced(small_config, kind, checked):
    config = RunConfig.from_dict(
        {
            **small_config.to_dict(),
            "initial_observable": {"kind": kind},
            "times": [0.1, 1.0],
            "routes": ["cumulant", "reduced"],
            "n_random_points": 1,
        }
    )
    result = cmd_evolve_dual(config, load_points(), RegressionFixtures())
    assert result.exit_code == EXIT_OK
    assert result.report["checked"] == checked
    assert result.report["frozen"] == 0


def test_regression_path(tmp_path):
    assert DEFAULT_VALUES_FILE.exists()
    assert regression_path(None, str(tmp_path)) == DEFAULT_VALUES_FILE
    assert regression_path(None, str(tmp_path), freeze=True) == tmp_path / "dual_values.json"
    assert regression_path("mine.json", str(tmp_path), freeze=True) == Path("mine.json")


def test_cli_freezes_into_the_output_directory(tmp_path):
    shipped = DEFAULT_VALUES_FILE.read_text(encoding="utf-8")
    out = tmp_path / "out"
    values = {
        "N_max": 2,
        "s_values": [1],
        "times": [0.3],
        "routes": ["cumulant"],
        "n_random_points": 1,
        "initial_observable": {"kind": "number"},
        "initial_state": {"n_particles": 2},
    }
    config = write_config(tmp_path, **values)
    assert cli.main(["evolve-dual", "--config", str(config), "--out", str(out), "--freeze"]) == EXIT_OK
    frozen = json.loads((out / "dual_values.json").read_text(encoding="utf-8"))
    assert set(frozen) == {f"number|s=1|t=0.3|{point_id}" for point_id, _ in load_points()[1]}
    assert DEFAULT_VALUES_FILE.read_text(encoding="utf-8") == shipped

    again = tmp_path / "again.json"
    again.write_text(json.dumps({**values, "regression_file": str(out / "dual_values.json")}), encoding="utf-8")
    rerun = tmp_path / "rerun"
    assert cli.main(["evolve-dual", "--config", str(again), "--out", str(rerun)]) == EXIT_OK
    manifest = json.loads((rerun / "evolve-dual_manifest.json").read_text(encoding="utf-8"))
    assert manifest["report"]["checked"] == len(frozen)


def test_compare_series_command(small_config):
    config = RunConfig.from_dict(
        {
            **small_config.to_dict(),
            "N_max": 2,
            "s_values": [1],
            "initial_state": {"n_particles": 2},
            "n_samples": 300,
            "quadrature_nodes": 2,
            "lebedev_order": 3,
            "tolerance_k": 5.0,
            "sampling": {"position_width": 2.0},
        }
    )
    result = cmd_compare_series(config)
    assert result.exit_code == EXIT_OK
    assert result.report["order_max"] == 1
    assert [comparison["t"] for comparison in result.report["comparisons"]] == [0.0, 0.3]
    assert {row.method for row in result.rows} == {
        "iteration-order-0",
        "cumulant-order-0",
        "iteration-order-1",
        "cumulant-order-1",
        "iteration-total",
        "cumulant-total",
    }
    at_start = [row.value for row in result.rows if row.t == 0.0 and row.method.endswith("order-1")]
    assert at_start == pytest.approx([0.0, 0.0], abs=1e-12)


def test_duality_command(small_config):
    config = RunConfig.from_dict(
        {
            **small_config.to_dict(),
            "N_max": 2,
            "s_values": [1],
            "initial_state": {"n_particles": 2},
            "times": [0.0, 0.4],
            "n_samples": 1500,
            "beta": 0.5,
            "tolerance_k": 5.0,
            "sampling": {"position_width": 2.0},
        }
    )
    result = cmd_duality(config)
    assert result.exit_code == EXIT_OK
    checks = result.report["checks"]
    assert [(check["name"], check["t"]) for check in checks] == [
        (name, t) for name in ("config", "number", "random-0") for t in (0.0, 0.4)
    ]
    assert all(check["passed"] for check in checks)
    assert all(check["difference"] == 0.0 for check in checks if check["t"] == 0.0)
    assert all(check["stderr"] > 0.0 for check in checks if check["t"] > 0.0)
    assert len(result.rows) == 18


@pytest.mark.slow
def test_evolve_state_reuses_cache(small_config, tmp_path):
    config = RunConfig.from_dict({**small_config.to_dict(), "times": [0.3], "s_values": [2]})
    cache = EstimateCache(str(tmp_path / "cache"))
    first = cmd_evolve_state(config, cache)
    second = cmd_evolve_state(config, cache)
    assert cache.get_cache_stats()["per_quantity"] == {"evolve-state": 1}
    assert [row.value for row in first.rows] == [row.value for row in second.rows]
    assert {row.method for row in first.rows} >= {"cumulant", "cumulant-order-0", "cumulant-order-1", "oracle"}


def test_cli_usage_error(tmp_path):
    config = write_config(tmp_path, N_max=3, bogus=True)
    assert cli.main(["verify-algebra", "--config", str(config), "--out", str(tmp_path / "out")]) == EXIT_USAGE
    assert not (tmp_path / "out").exists()


def test_cli_verify_algebra(tmp_path):
    out = tmp_path / "out"
    config = write_config(tmp_path, N_max=3, out=str(out))
    assert cli.main(["verify-algebra", "--config", str(config)]) == EXIT_OK
    manifest = json.loads((out / "verify-algebra_manifest.json").read_text(encoding="utf-8"))
    assert manifest["passed"] is True
    assert manifest["report"]["checks"]
    assert (out / "verify-algebra.csv").exists()


def test_cli_reports_corrupted_algebra(tmp_path):
    out = tmp_path / "out"
    config = write_config(tmp_path, N_max=3)
    assert cli.main(["verify-algebra", "--config", str(config), "--out", str(out), "--corrupt"]) == EXIT_FAILURE
    manifest = json.loads((out / "verify-algebra_manifest.json").read_text(encoding="utf-8"))
    assert manifest["exit_code"] == EXIT_FAILURE
    assert manifest["report"]["failures"]
