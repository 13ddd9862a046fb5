"""One function per CLI subcommand; each returns rows for the CSV, a report for the manifest and an exit code."""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from .cache import EstimateCache, fingerprint
from .config import RunConfig, build_observable, build_state
from .fixtures import LabeledPoint, RegressionFixtures, random_points, state_points
from .output import ResultRow
from ..algebra.verification import MAX_SYMBOLIC_ORDER, verify_algebra
from ..dynamics.models import Configuration
from ..functionals.library import AdditiveFunction, PairFunction, ProductFunction, random_bump
from ..functionals.sampling import MCEstimate, stream_rng
from ..functionals.sequences import ObservableSeq, reduce_state
from ..solver.checks import duality_check
from ..solver.collision import CollisionKernelSpec
from ..solver.dual import DualSolutionRequest, dual_solution_B, dual_solution_additive, dual_solution_kary
from ..solver.iteration import TimeQuadrature, iteration_series_state
from ..solver.state import StateSolutionRequest, compare_state_routes, state_solution_F


logger = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

ROUTE_TOLERANCE = 1e-10
ABSOLUTE_FLOOR = 1e-12


@dataclass
class CommandResult:
    command: str
    exit_code: int = EXIT_OK
    rows: List[ResultRow] = field(default_factory=list)
    report: Dict[str, Any] = field(default_factory=dict)

    def fail(self, message: str):
        self.exit_code = EXIT_FAILURE
        self.report.setdefault("failures", []).append(message)
        logger.error(message)


def _cached(
    cache: Optional[EstimateCache],
    config: RunConfig,
    quantity: str,
    compute: Callable[[], Tuple[List[ResultRow], Dict[str, Any]]],
    **extra: Any,
) -> Tuple[List[ResultRow], Dict[str, Any]]:
    if cache is None:
        return compute()
    key = fingerprint(quantity, config.to_dict(), config.seed, **extra)
    payload = cache.get(key)
    if payload is not None:
        return [ResultRow(**row) for row in payload["rows"]], payload["details"]
    rows, details = compute()
    cache.put(key, quantity, {"rows": [asdict(row) for row in rows], "details": details})
    return rows, details


def cmd_verify_algebra(config: RunConfig, corrupt: bool = False) -> CommandResult:
    result = CommandResult("verify-algebra")
    n_max = min(config.N_max, MAX_SYMBOLIC_ORDER)
    report = verify_algebra(n_max, perturbation=1 if corrupt else 0)
    result.report = report.to_dict()
    for check in report.failures():
        result.fail(f"{check.identity} fails at s={check.s}, n={check.n}: {check.residual}")
    return result


def dual_points(config: RunConfig, fixtures: Dict[int, List[LabeledPoint]], s: int) -> List[LabeledPoint]:
    return list(fixtures.get(s, [])) + random_points(s, config.n_random_points, config.seed, config.sigma)


def _dual_methods(config: RunConfig, b0: ObservableSeq, s: int, t: float, points: List[Configuration]) -> Dict[str, List[float]]:
    methods = {route: dual_solution_B(DualSolutionRequest(s, t, b0, points), route).values for route in config.routes}
    section = config.initial_observable
    if section["kind"] == "additive":
        b1 = b0.component(1)
        methods["additive"] = dual_solution_additive(b1, s, t, points).values
    elif section["kind"] == "kary":
        k = int(section.get("k", 2))
        methods["kary"] = dual_solution_kary(b0.component(k), k, s, t, points).values
    return methods


def cmd_evolve_dual(
    config: RunConfig,
    fixtures: Dict[int, List[LabeledPoint]],
    regression: Optional[RegressionFixtures] = None,
    freeze: bool = False,
) -> CommandResult:
    """B_s(t) at fixture and random points through every configured route."""
    result = CommandResult("evolve-dual")
    b0 = build_observable(config)
    kind = config.initial_observable["kind"]
    worst_route_gap = 0.0
    frozen = 0
    checked = 0
    for s in config.s_values:
        labeled = dual_points(config, fixtures, s)
        points = [point for _, point in labeled]
        for t in config.times:
            methods = _dual_methods(config, b0, s, t, points)
            for method, values in methods.items():
                for (point_id, _), value in zip(labeled, values):
                    result.rows.append(ResultRow(s, t, point_id, method, value, 0.0, 0, config.seed))

            for index, (point_id, _) in enumerate(labeled):
                column = [values[index] for values in methods.values() if not math.isnan(values[index])]
                if not column:
                    continue
                gap = max(column) - min(column)
                worst_route_gap = max(worst_route_gap, gap)
                if gap > ROUTE_TOLERANCE * max(1.0, max(abs(v) for v in column)):
                    result.fail(f"routes disagree by {gap:.3g} at s={s}, t={t}, point {point_id}")
                    continue
                if kind == "number" and abs(column[0] - (1.0 if s == 1 else 0.0)) > ROUTE_TOLERANCE:
                    result.fail(f"number observable not conserved at s={s}, t={t}, point {point_id}: {column[0]!r}")
                if regression is None or not point_id.startswith("fix"):
                    continue
                key = RegressionFixtures.key(kind, s, t, point_id)
                status = regression.check(key, column[0])
                if status is None and freeze:
                    regression.freeze(key, column[0])
                    frozen += 1
                elif status:
                    checked += 1
                elif status is False:
                    result.fail(f"regression value changed for {key}: {column[0]!r} vs {regression.values[key]!r}")
    if regression is not None and frozen:
        regression.save()
    result.report = {"max_route_gap": worst_route_gap, "frozen": frozen, "checked": checked, "routes": list(config.routes)}
    return result


def _series_order(config: RunConfig, s: int) -> int:
    particles = int(config.initial_state["n_particles"])
    return max(0, min(config.n_max, config.N_max - s, particles - s))


def cmd_evolve_state(config: RunConfig, cache: Optional[EstimateCache] = None) -> CommandResult:
    """F_s(t) by the truncated cumulant series with per-order rows, checked against the Liouville oracle when complete."""
    result = CommandResult("evolve-state")
    d = build_state(config)
    f0 = reduce_state(d, config.n_samples, config.seed)
    particles = int(config.initial_state["n_particles"])
    spec = config.sampling_spec()
    summaries = []
    for s in [s for s in config.s_values if s <= particles]:
        labeled = state_points(s, 2, spec, config.seed)
        points = [point for _, point in labeled]
        n_max = _series_order(config, s)
        complete = s + n_max >= particles
        for t in config.times:

            def compute(s=s, t=t, n_max=n_max, complete=complete):
                request = StateSolutionRequest(
                    s, t, f0, n_max, points, config.n_samples, config.seed, config.alpha, config.tail_tolerance
                )
                rows: List[ResultRow] = []
                details: Dict[str, Any] = {"s": s, "t": t, "n_max": n_max, "oracle": []}
                for (point_id, _), solution in zip(labeled, state_solution_F(request)):
                    rows.append(ResultRow.from_estimate(s, t, point_id, "cumulant", solution.total))
                    for n, order in enumerate(solution.orders):
                        rows.append(ResultRow.from_estimate(s, t, point_id, f"cumulant-order-{n}", order))
                    if solution.suggested_n_max is not None:
                        details.setdefault("suggested_n_max", []).append(solution.suggested_n_max)
                if complete:
                    for (point_id, _), routes in zip(labeled, compare_state_routes(request)):
                        rows.append(ResultRow.from_estimate(s, t, point_id, "reduced", routes.reduced))
                        rows.append(ResultRow.from_estimate(s, t, point_id, "oracle", routes.oracle))
                        difference = routes.cumulant_minus_oracle
                        details["oracle"].append(
                            {"point_id": point_id, "difference": difference.value, "stderr": difference.stderr}
                        )
                return rows, details

            rows, details = _cached(cache, config, "evolve-state", compute, s=s, t=t)
            result.rows.extend(rows)
            summaries.append(details)
            for entry in details["oracle"]:
                if abs(entry["difference"]) > config.tolerance_k * entry["stderr"] + ABSOLUTE_FLOOR:
                    result.fail(
                        f"F_{s}({t}) at {entry['point_id']} differs from the oracle by "
                        f"{entry['difference']:.3g} ± {entry['stderr']:.2g}"
                    )
    result.report = {"normalization": f0.normalization.to_dict() if f0.normalization else None, "series": summaries}
    return result


def duality_observables(config: RunConfig) -> Dict[str, ObservableSeq]:
    """The configured observable, the number observable and random smooth sequences."""
    observables = {"config": build_observable(config), "number": ObservableSeq.number(config.N_max, config.sigma)}
    for index in range(config.n_duality_pairs):
        one = random_bump(stream_rng(config.seed, 17, index))
        components = [None, AdditiveFunction(one), PairFunction(config.sigma)]
        components += [ProductFunction(one) for _ in range(3, config.N_max + 1)]
        observables[f"random-{index}"] = ObservableSeq(components[: config.N_max + 1], config.sigma)
    return observables


def cmd_duality(config: RunConfig, cache: Optional[EstimateCache] = None) -> CommandResult:
    result = CommandResult("duality")
    d = build_state(config)
    f0 = reduce_state(d, config.n_samples, config.seed)
    checks = []
    for stream, (name, b0) in enumerate(duality_observables(config).items()):
        for t in config.times:

            def compute(b0=b0, t=t, stream=stream):
                report = duality_check(b0, d, t, config.n_samples, config.seed, f0, stream=stream)
                rows = [
                    ResultRow.from_estimate(0, t, name, "observable-side", report.evolved_observable),
                    ResultRow.from_estimate(0, t, name, "state-side", report.evolved_state),
                    ResultRow.from_estimate(0, t, name, "difference", report.difference),
                ]
                return rows, {"name": name, "t": t, "difference": report.difference.value, "stderr": report.difference.stderr}

            rows, details = _cached(cache, config, "duality", compute, name=name, t=t)
            result.rows.extend(rows)
            details["passed"] = abs(details["difference"]) <= config.tolerance_k * details["stderr"] + ABSOLUTE_FLOOR
            checks.append(details)
            if not details["passed"]:
                result.fail(f"duality fails for {name} at t={t}: {details['difference']:.3g} ± {details['stderr']:.2g}")
    result.report = {"checks": checks}
    return result


def _agree(a: MCEstimate, b: MCEstimate, k: float, quadrature: float) -> bool:
    return abs(a.value - b.value) <= k * math.hypot(a.stderr, b.stderr) + quadrature + ABSOLUTE_FLOOR


def cmd_compare_series(config: RunConfig, cache: Optional[EstimateCache] = None) -> CommandResult:
    """Iteration (Duhamel) series against the cumulant series for s = 1, order by order."""
    result = CommandResult("compare-series")
    d = build_state(config)
    f0 = reduce_state(d, config.n_samples, config.seed)
    s = 1
    order_max = min(2, _series_order(config, s))
    labeled = state_points(s, 1, config.sampling_spec(), config.seed)
    kernel = CollisionKernelSpec(lebedev_order=config.lebedev_order)
    quadrature = TimeQuadrature(config.quadrature_nodes)
    comparisons = []
    for t in config.times:

        def compute(t=t):
            rows: List[ResultRow] = []
            details: Dict[str, Any] = {"t": t, "orders": []}
            for point_id, point in labeled:
                iteration = iteration_series_state(
                    s, t, f0, order_max, point, quadrature, kernel, config.n_samples, config.seed
                )
                request = StateSolutionRequest(s, t, f0, order_max, [point], config.n_samples, config.seed, config.alpha)
                routes = compare_state_routes(request, with_oracle=False)[0]
                for n in range(order_max + 1):
                    cumulant = routes.orders[n]
                    duhamel = iteration.orders[n]
                    tolerance = iteration.quadrature_tolerance[n]
                    rows.append(ResultRow.from_estimate(s, t, point_id, f"iteration-order-{n}", duhamel))
                    rows.append(ResultRow.from_estimate(s, t, point_id, f"cumulant-order-{n}", cumulant))
                    details["orders"].append(
                        {
                            "point_id": point_id,
                            "order": n,
                            "passed": _agree(duhamel, cumulant, config.tolerance_k, tolerance),
                            "quadrature_tolerance": tolerance,
                        }
                    )
                rows.append(ResultRow.from_estimate(s, t, point_id, "iteration-total", iteration.total))
                rows.append(ResultRow.from_estimate(s, t, point_id, "cumulant-total", routes.cumulant))
                details["refinement_report"] = iteration.refinement_report
            return rows, details

        rows, details = _cached(cache, config, "compare-series", compute, t=t)
        result.rows.extend(rows)
        comparisons.append(details)
        for entry in details["orders"]:
            if not entry["passed"]:
                result.fail(f"order {entry['order']} differs between series at t={t}, point {entry['point_id']}")
    result.report = {"order_max": order_max, "comparisons": comparisons}
    return result
