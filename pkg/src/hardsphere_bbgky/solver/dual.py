import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Sequence, Tuple

import numpy as np

from .evaluation import (
    CompiledSum,
    compiled_dual_cumulant,
    compiled_reduced_subsets,
    compiled_second_order,
    compiled_singleton_cumulant,
    complement,
    evaluate_compiled,
)
from ..combinatorics.partitions import enumerate_injections, subsets
from ..dynamics.flow import ClusterFlowCache
from ..dynamics.models import Configuration, PathologyError
from ..functionals.sequences import ObservableSeq, creation_exponential


logger = logging.getLogger(__name__)


DUAL_ROUTES = ("cumulant", "reduced", "direct", "second-order")


@dataclass
class DualSolutionRequest:
    s: int
    t: float
    b0: ObservableSeq
    points: List[Configuration]

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("component index must be non-negative")
        for index, point in enumerate(self.points):
            if point.n != self.s:
                raise ValueError(f"point {index} has {point.n} particles, expected {self.s}")
            if not point.is_allowed():
                raise ValueError(f"point {index} is a forbidden configuration")


@dataclass
class DualSolution:
    """Values per evaluation point; NaN marks points rejected for pathological trajectories."""

    s: int
    t: float
    route: str
    values: List[float] = field(default_factory=list)
    rejected: Dict[int, str] = field(default_factory=dict)

    def to_rows(self) -> List[Tuple[int, float]]:
        return list(enumerate(self.values))


def _injection_sum(s: int, n: int, value_of: Callable[[Tuple[int, ...]], float]) -> float:
    """(1/n!) Σ over ordered tuples of n distinct labels; the value depends on the label set only."""
    memo: Dict[FrozenSet[int], float] = {}
    total = 0.0
    for removed in enumerate_injections(n, s):
        key = frozenset(removed)
        if key not in memo:
            memo[key] = value_of(tuple(sorted(removed)))
        total += memo[key]
    return total / math.factorial(n)


def _component_function(b0: ObservableSeq, k: int) -> Callable[[np.ndarray, np.ndarray], float]:
    def func(q: np.ndarray, p: np.ndarray) -> float:
        return b0.value(k, q, p)

    return func


def _cumulant_route(b0: ObservableSeq, point: Configuration, cache: ClusterFlowCache, compiled_for) -> float:
    s = point.n
    total = 0.0
    # The n = s term carries an empty remaining cluster and vanishes.
    for n in range(0, s):
        if b0.component(s - n) is None:
            continue
        func = _component_function(b0, s - n)

        def value_of(removed: Tuple[int, ...]) -> float:
            return evaluate_compiled(compiled_for(s, removed), func, cache, complement(s, removed))

        total += _injection_sum(s, n, value_of)
    return total


def _reduced_compiled(s: int, removed: Tuple[int, ...]) -> CompiledSum:
    return compiled_reduced_subsets(complement(s, removed), removed, False)


def _second_order_compiled(s: int, removed: Tuple[int, ...]) -> CompiledSum:
    if len(removed) < 2:
        return compiled_dual_cumulant(s, removed)
    return compiled_second_order(s, removed)


def _direct_route(b0: ObservableSeq, point: Configuration, cache: ClusterFlowCache) -> float:
    """e^{-𝔞⁺} S(t) e^{𝔞⁺} B(0) at the point."""
    a = creation_exponential(b0, 1)
    s = point.n
    total = 0.0
    for chosen in subsets(range(s)):
        sign = (-1) ** (s - len(chosen))
        if not chosen:
            empty = np.zeros((0, 3))
            total += sign * a.value(0, empty, empty)
            continue
        evolved = cache.flow(chosen)
        if evolved is None:
            continue
        total += sign * a.value(len(chosen), evolved.positions, evolved.momenta)
    return total


def dual_value(b0: ObservableSeq, point: Configuration, t: float, route: str = "cumulant") -> float:
    """B_s(t) at one s-particle point, s = point.n."""
    if route not in DUAL_ROUTES:
        raise ValueError(f"route must be one of {DUAL_ROUTES}, got {route!r}")
    if t == 0.0 or point.n == 0:
        return b0.value(point.n, point.positions, point.momenta)
    if not point.is_allowed():
        return 0.0
    cache = ClusterFlowCache(point, t)
    if route == "direct":
        return _direct_route(b0, point, cache)
    compiled_for = {
        "cumulant": compiled_dual_cumulant,
        "reduced": _reduced_compiled,
        "second-order": _second_order_compiled,
    }[route]
    return _cumulant_route(b0, point, cache, compiled_for)


def _solve(request: DualSolutionRequest, route: str, evaluate: Callable[[Configuration], float]) -> DualSolution:
    solution = DualSolution(request.s, request.t, route)
    for index, point in enumerate(request.points):
        try:
            solution.values.append(evaluate(point))
        except PathologyError as error:
            solution.values.append(math.nan)
            solution.rejected[index] = str(error)
            logger.warning(f"Point {index} rejected at s={request.s}, t={request.t}: {error}")
    return solution


def dual_solution_B(request: DualSolutionRequest, route: str = "cumulant") -> DualSolution:
    """B_s(t) = Σ_{n<s} (1/n!) Σ_{j_1≠..≠j_n} 𝔄_{1+n}(t, {Y∖J}, J) B⁰_{s-n}(Y∖J)."""
    return _solve(request, route, lambda point: dual_value(request.b0, point, request.t, route))


def reduced_cumulant_solution_dual(request: DualSolutionRequest) -> DualSolution:
    return dual_solution_B(request, "reduced")


def dual_solution_direct(request: DualSolutionRequest) -> DualSolution:
    return dual_solution_B(request, "direct")


def dual_solution_second_order(request: DualSolutionRequest) -> DualSolution:
    return dual_solution_B(request, "second-order")


def _additive_value(b1: Callable, point: Configuration, t: float, sigma: float) -> float:
    s = point.n
    seq = ObservableSeq.single(1, b1, 1, sigma)
    if t == 0.0:
        return seq.value(1, point.positions, point.momenta) if s == 1 else 0.0
    cache = ClusterFlowCache(point, t)
    compiled = compiled_singleton_cumulant(s)
    func = _component_function(seq, 1)
    return sum(evaluate_compiled(compiled, func, cache, (r,)) for r in range(1, s + 1))


def dual_solution_additive(b1: Callable, s: int, t: float, points: Sequence[Configuration]) -> DualSolution:
    """B_s(t) for B(0) = (0, b_1, 0, ...): the s-th order cumulant applied to Σ_j b_1(x_j)."""
    if s < 1:
        raise ValueError("additive observables start at s = 1")
    sigma = points[0].sigma if points else 1.0
    request = DualSolutionRequest(s, t, ObservableSeq.single(1, b1, max(s, 1), sigma), list(points))
    return _solve(request, "additive", lambda point: _additive_value(b1, point, t, sigma))


def _kary_value(b_k: Callable, k: int, point: Configuration, t: float, sigma: float) -> float:
    s = point.n
    seq = ObservableSeq.single(k, b_k, k, sigma)
    if t == 0.0:
        return seq.value(k, point.positions, point.momenta) if s == k else 0.0
    func = _component_function(seq, k)
    cache = ClusterFlowCache(point, t)
    total = 0.0
    for rest in itertools.combinations(range(1, s + 1), k):
        removed = complement(s, rest)
        total += evaluate_compiled(compiled_dual_cumulant(s, removed), func, cache, rest)
    return total


def dual_solution_kary(b_k: Callable, k: int, s: int, t: float, points: Sequence[Configuration]) -> DualSolution:
    """B_s(t) for B(0) with only the k-th component: zero for s < k, else 𝔄_{1+s-k} summed over k-subsets."""
    if k < 1:
        raise ValueError("k-ary observables need k >= 1")
    sigma = points[0].sigma if points else 1.0
    request = DualSolutionRequest(s, t, ObservableSeq.single(k, b_k, max(s, k), sigma), list(points))
    if s < k:
        return DualSolution(s, t, "kary", [0.0] * len(points))
    return _solve(request, "kary", lambda point: _kary_value(b_k, k, point, t, sigma))


@dataclass(frozen=True)
class DualEvolved:
    """x ↦ B_s(t, x) as a phase function, for pairing against states."""

    b0: ObservableSeq
    t: float
    route: str = "cumulant"

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        return dual_value(self.b0, Configuration(q, p, self.b0.sigma), self.t, self.route)


def evolved_observable(b0: ObservableSeq, t: float, route: str = "cumulant") -> ObservableSeq:
    """The sequence B(t) with components evaluated through the dual expansion."""
    return ObservableSeq([DualEvolved(b0, t, route) for _ in b0.components], b0.sigma)
