import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional, Union

import numpy as np

from .dual import DualSolution, DualSolutionRequest, reduced_cumulant_solution_dual
from .evaluation import (
    CompiledSum,
    compiled_reduced_subsets,
    compiled_state_cumulant,
    evaluate_compiled,
    joined,
)
from ..combinatorics.partitions import cumulant_norm_bound
from ..dynamics.flow import ClusterFlowCache
from ..dynamics.models import Configuration
from ..functionals.norms import norm_diagnostics
from ..functionals.library import ZeroOnForbidden
from ..functionals.sampling import ChannelResult, ChannelSet, MCEstimate, PhaseFunction
from ..functionals.sequences import MarginalTerm, StateSeq, Transported


logger = logging.getLogger(__name__)


@dataclass
class StateSolutionRequest:
    s: int
    t: float
    f0: StateSeq
    n_max: int
    points: List[Configuration]
    n_samples: int = 4000
    seed: int = 0
    alpha: float = 3.0
    tail_tolerance: float = 0.05

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("state components start at s = 1")
        if self.n_max < 0 or self.s + self.n_max > self.f0.n_max:
            raise ValueError(f"n_max={self.n_max} with s={self.s} exceeds N_max={self.f0.n_max}")
        for index, point in enumerate(self.points):
            if point.n != self.s:
                raise ValueError(f"point {index} has {point.n} particles, expected {self.s}")


@dataclass
class StateSolutionResult:
    point_id: int
    total: MCEstimate
    orders: List[MCEstimate] = field(default_factory=list)
    bounds: List[float] = field(default_factory=list)
    tail_estimate: float = 0.0
    suggested_n_max: Optional[int] = None


@dataclass
class StateRoutes:
    """Cumulant series, reduced-cumulant series and Liouville oracle at one point, on shared samples."""

    point_id: int
    cumulant: MCEstimate
    reduced: MCEstimate
    oracle: Optional[MCEstimate]
    cumulant_minus_oracle: Optional[MCEstimate]
    reduced_minus_cumulant: MCEstimate
    orders: List[MCEstimate] = field(default_factory=list)


def _series_integrand(
    compiled: CompiledSum,
    term: MarginalTerm,
    point: Configuration,
    n: int,
    t: float,
) -> PhaseFunction:
    """Sampled rows: n added particles at time t, then term.n_free marginal particles at time 0.

    Only an interacting block that starts overlapping drops its monomial;
    freely streamed products stay defined on overlapping arguments. The
    marginal density vanishes on overlaps of its own arguments.
    """
    s = point.n
    labels = tuple(range(1, s + n + 1))
    density_on_allowed = ZeroOnForbidden(term.density, point.sigma)

    def integrand(q: np.ndarray, p: np.ndarray) -> float:
        positions = np.vstack([point.positions, q[:n]])
        z = Configuration(positions, np.vstack([point.momenta, p[:n]]), point.sigma)
        cache = ClusterFlowCache(z, -t)
        density = joined(density_on_allowed, q[n:], p[n:])
        return evaluate_compiled(compiled, density, cache, labels)

    return integrand


def _oracle_integrand(term: MarginalTerm, point: Configuration, t: float) -> PhaseFunction:
    transported = ZeroOnForbidden(Transported(term.density, t, point.sigma), point.sigma)

    def integrand(q: np.ndarray, p: np.ndarray) -> float:
        return float(transported(np.vstack([point.positions, q]), np.vstack([point.momenta, p])))

    return integrand


def add_series_channels(
    channels: ChannelSet,
    f0: StateSeq,
    point: Configuration,
    t: float,
    n_max: int,
    route: str = "cumulant",
) -> Dict[int, Dict[Hashable, float]]:
    """Channels of Σ_{n<=n_max} (1/n!)∫ 𝔄*_{1+n}(t) F⁰_{s+n}, grouped per order.

    route="reduced" uses Σ_{W} (-1)^{n-|W|} S*(1..s ∪ W) instead of the
    partition expansion; the two integrands differ but their integrals agree.
    """
    s = point.n
    orders: Dict[int, Dict[Hashable, float]] = {}
    for n in range(0, n_max + 1):
        if route == "cumulant":
            compiled = compiled_state_cumulant(s, n)
        else:
            compiled = compiled_reduced_subsets(tuple(range(1, s + 1)), tuple(range(s + 1, s + n + 1)), True)
        orders[n] = {}
        for index, term in enumerate(f0.terms(s + n)):
            key = (route, n, index)
            channels.add(key, n + term.n_free, _series_integrand(compiled, term, point, n, t))
            orders[n][key] = term.weight / math.factorial(n)
    return orders


def add_oracle_channels(channels: ChannelSet, f0: StateSeq, point: Configuration, t: float) -> Dict[Hashable, float]:
    """reduce_state(S*(t)D)_s at the point, for F⁰ built from D by reduce_state."""
    coefficients: Dict[Hashable, float] = {}
    for index, term in enumerate(f0.terms(point.n)):
        key = ("oracle", index)
        channels.add(key, term.n_free, _oracle_integrand(term, point, t))
        coefficients[key] = term.weight
    return coefficients


def _merge(*parts: Dict[Hashable, float]) -> Dict[Hashable, float]:
    merged: Dict[Hashable, float] = {}
    for part in parts:
        for key, value in part.items():
            merged[key] = merged.get(key, 0.0) + value
    return merged


def _difference(left: Dict[Hashable, float], right: Dict[Hashable, float]) -> Dict[Hashable, float]:
    return _merge(left, {key: -value for key, value in right.items()})


def _combine(result: ChannelResult, coefficients: Dict[Hashable, float]) -> MCEstimate:
    if not coefficients:
        return MCEstimate(0.0, 0.0, 0, result.seed)
    return result.combine(coefficients)


def _tail(orders: List[MCEstimate], bounds: List[float], alpha: float) -> float:
    """Tail beyond the last order: geometric extrapolation of the computed orders, else the α-bound factor."""
    magnitudes = [abs(order.value) for order in orders]
    if len(magnitudes) >= 2 and magnitudes[-2] > 0.0:
        ratio = magnitudes[-1] / magnitudes[-2]
        if ratio < 1.0:
            return magnitudes[-1] * ratio / (1.0 - ratio)
    x = math.e / alpha
    if x < 1.0 and bounds:
        return bounds[-1] * x / (1.0 - x)
    return math.inf


def _suggest(orders: List[MCEstimate], tolerance: float, total: float, n_max: int) -> int:
    magnitudes = [abs(order.value) for order in orders]
    if len(magnitudes) >= 2 and 0.0 < magnitudes[-1] < magnitudes[-2]:
        ratio = magnitudes[-1] / magnitudes[-2]
        target = tolerance * max(abs(total), 1e-300)
        extra = math.ceil(math.log(target / magnitudes[-1]) / math.log(ratio)) if target < magnitudes[-1] else 0
        return n_max + max(1, extra)
    return n_max + 1


def _estimate_point(request: StateSolutionRequest, index: int, point: Configuration, norm: float) -> StateSolutionResult:
    channels = ChannelSet(request.f0.spec, "lebesgue", mask_overlaps=False)
    orders = add_series_channels(channels, request.f0, point, request.t, request.n_max)
    result = channels.estimate(request.n_samples, request.seed, stream=index)
    per_order = [_combine(result, orders[n]) for n in range(0, request.n_max + 1)]
    total = _combine(result, _merge(*orders.values()))
    # Cumulant estimate: the (1+n)-th order term is bounded by Σ_k S(n+1,k)(k-1)!/n! times α^{-n}·‖F⁰‖_α.
    bounds = [cumulant_norm_bound(n) / math.factorial(n) * request.alpha ** (-n) * norm for n in range(0, request.n_max + 1)]
    tail = _tail(per_order, bounds, request.alpha)
    suggested = None
    if tail > request.tail_tolerance * abs(total.value):
        suggested = _suggest(per_order, request.tail_tolerance, total.value, request.n_max)
        logger.warning(
            f"Point {index}: tail estimate {tail:.3g} exceeds {request.tail_tolerance:.0%} of |F_{request.s}| = "
            f"{abs(total.value):.3g}; suggested n_max = {suggested}"
        )
    return StateSolutionResult(index, total, per_order, bounds, tail, suggested)


def state_solution_F(request: StateSolutionRequest) -> List[StateSolutionResult]:
    """F_s(t) = Σ_{n<=n_max} (1/n!) ∫ dx_{s+1..s+n} 𝔄*_{1+n}(t) F⁰_{s+n} at each evaluation point."""
    norm = norm_diagnostics(request.f0, "L1_alpha", request.alpha, request.f0.spec, min(request.n_samples, 2000), request.seed)
    return [_estimate_point(request, index, point, norm) for index, point in enumerate(request.points)]


def compare_state_routes(request: StateSolutionRequest, with_oracle: bool = True) -> List[StateRoutes]:
    comparisons = []
    for index, point in enumerate(request.points):
        channels = ChannelSet(request.f0.spec, "lebesgue", mask_overlaps=False)
        cumulant_orders = add_series_channels(channels, request.f0, point, request.t, request.n_max, "cumulant")
        reduced_orders = add_series_channels(channels, request.f0, point, request.t, request.n_max, "reduced")
        oracle = add_oracle_channels(channels, request.f0, point, request.t) if with_oracle else {}
        result = channels.estimate(request.n_samples, request.seed, stream=index)

        cumulant = _merge(*cumulant_orders.values())
        reduced = _merge(*reduced_orders.values())
        comparisons.append(
            StateRoutes(
                point_id=index,
                cumulant=_combine(result, cumulant),
                reduced=_combine(result, reduced),
                oracle=_combine(result, oracle) if with_oracle else None,
                cumulant_minus_oracle=_combine(result, _difference(cumulant, oracle)) if with_oracle else None,
                reduced_minus_cumulant=_combine(result, _difference(reduced, cumulant)),
                orders=[_combine(result, cumulant_orders[n]) for n in sorted(cumulant_orders)],
            )
        )
    return comparisons


def reduced_cumulant_solution_state(request: StateSolutionRequest) -> List[MCEstimate]:
    estimates = []
    for index, point in enumerate(request.points):
        channels = ChannelSet(request.f0.spec, "lebesgue", mask_overlaps=False)
        orders = add_series_channels(channels, request.f0, point, request.t, request.n_max, "reduced")
        result = channels.estimate(request.n_samples, request.seed, stream=index)
        estimates.append(_combine(result, _merge(*orders.values())))
    return estimates


def liouville_oracle(f0: StateSeq, t: float, points: List[Configuration], n_samples: int, seed: int) -> List[MCEstimate]:
    """reduce_state(S*(t)D) at the points, with F⁰ = reduce_state(D) supplying the weights and normalization."""
    estimates = []
    for index, point in enumerate(points):
        channels = ChannelSet(f0.spec, "lebesgue", mask_overlaps=False)
        coefficients = add_oracle_channels(channels, f0, point, t)
        estimates.append(_combine(channels.estimate(n_samples, seed, stream=index), coefficients))
    return estimates


def reduced_cumulant_solution(
    side: str,
    request: Union[DualSolutionRequest, StateSolutionRequest],
) -> Union[DualSolution, List[MCEstimate]]:
    """Either solution through reduced cumulants: nested flows in binomial alternating sums."""
    if side == "dual":
        return reduced_cumulant_solution_dual(request)
    if side == "state":
        return reduced_cumulant_solution_state(request)
    raise ValueError(f"side must be 'dual' or 'state', got {side!r}")
