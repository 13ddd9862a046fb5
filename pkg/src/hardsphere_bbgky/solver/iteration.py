import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_legendre

from .collision import SPHERE_AREA, CollisionKernelSpec, collision_kernel, random_direction
from .evaluation import joined
from ..dynamics.flow import evolve
from ..dynamics.models import Configuration
from ..functionals.library import ZeroOnForbidden
from ..functionals.sampling import MCEstimate, PhaseFunction, SamplingSpec, run_chunks
from ..functionals.sequences import MarginalTerm, StateSeq, Transported


logger = logging.getLogger(__name__)


MAX_ITERATION_ORDER = 2


@dataclass(frozen=True)
class TimeQuadrature:
    """Gauss–Legendre rule on [0, t] (and on the simplex 0 < t2 < t1 < t), with one doubling for error estimation."""

    nodes: int = 8
    refine: bool = True
    rtol: float = 1e-2

    def __post_init__(self):
        if self.nodes < 1:
            raise ValueError("quadrature needs at least one node")

    def rule(self, t: float, refined: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        count = 2 * self.nodes if refined else self.nodes
        x, w = roots_legendre(count)
        return 0.5 * t * (x + 1.0), 0.5 * t * w

    def simplex_rule(self, t: float, refined: bool = False) -> List[Tuple[float, float, float]]:
        """(t1, t2, weight) with t2 = t1·u, u on [0, 1]."""
        outer_nodes, outer_weights = self.rule(t, refined)
        inner_nodes, inner_weights = self.rule(1.0, refined)
        return [
            (float(t1), float(t1 * u), float(w1 * wu * t1))
            for t1, w1 in zip(outer_nodes, outer_weights)
            for u, wu in zip(inner_nodes, inner_weights)
        ]


@dataclass
class IterationSeriesResult:
    s: int
    t: float
    orders: List[MCEstimate] = field(default_factory=list)
    total: Optional[MCEstimate] = None
    quadrature_tolerance: List[float] = field(default_factory=list)
    refinement_report: List[str] = field(default_factory=list)

    @property
    def refinement_ok(self) -> bool:
        return not self.refinement_report


class _Marginal:
    """z ↦ S*(tau) F⁰_k at z, with the marginal particles of every term taken from one draw y."""

    def __init__(self, terms: Sequence[MarginalTerm], spec: SamplingSpec, yq: np.ndarray, yp: np.ndarray):
        self.parts: List[Tuple[PhaseFunction, float]] = []
        for term in terms:
            m = term.n_free
            weight = term.weight
            if m:
                weight *= math.exp(-spec.log_density(yq[:m], yp[:m]))
            density = joined(ZeroOnForbidden(term.density, spec.sigma), yq[:m], yp[:m])
            self.parts.append((density, weight))
        self.sigma = spec.sigma

    def at(self, tau: float) -> PhaseFunction:
        transported = [(Transported(density, tau, self.sigma), weight) for density, weight in self.parts]

        def func(q: np.ndarray, p: np.ndarray) -> float:
            return sum(weight * float(f(q, p)) for f, weight in transported)

        return func


def _first_order(
    point: Configuration,
    t: float,
    marginal: _Marginal,
    rule: Tuple[np.ndarray, np.ndarray],
    kernel: CollisionKernelSpec,
    p_new: np.ndarray,
    directions: np.ndarray,
    weights: np.ndarray,
) -> float:
    """Σ_k W_k [Σ_i ∫dx_{s+1} ℒ*_int(i, s+1) S*_{s+1}(t_k) F⁰_{s+1}](Φ_{-(t-t_k)} x), one fresh momentum."""
    total = 0.0
    for t1, w1 in zip(*rule):
        inner = marginal.at(float(t1))
        start = evolve(point, -(t - float(t1)))
        for i in range(point.n):
            total += w1 * collision_kernel(inner, start, i, p_new, directions, weights, kernel.gain_offset_sign)
    return total / kernel.momentum_density(p_new)


def _second_order(
    point: Configuration,
    t: float,
    marginal: _Marginal,
    nodes: List[Tuple[float, float, float]],
    kernel: CollisionKernelSpec,
    draws: Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
) -> float:
    """Nested collision terms with one random direction per level."""
    p1, eta1, p2, eta2 = draws
    area = np.array([SPHERE_AREA])
    sign = kernel.gain_offset_sign
    total = 0.0
    for t1, t2, weight in nodes:
        inner = marginal.at(t2)

        def middle(q: np.ndarray, p: np.ndarray, t1=t1, t2=t2, inner=inner) -> float:
            z = evolve(Configuration(q, p, point.sigma), -(t1 - t2))
            return sum(collision_kernel(inner, z, j, p2, eta2[None, :], area, sign) for j in range(z.n))

        start = evolve(point, -(t - t1))
        for i in range(point.n):
            total += weight * collision_kernel(middle, start, i, p1, eta1[None, :], area, sign)
    return total / (kernel.momentum_density(p1) * kernel.momentum_density(p2))


def _free_rows(f0: StateSeq, s: int, order_max: int) -> int:
    return max((term.n_free for k in range(s, s + order_max + 1) for term in f0.terms(k)), default=0)


def _estimate(column: np.ndarray, seed: int, rejected: int) -> MCEstimate:
    n = len(column)
    return MCEstimate(float(column.mean()), float(np.std(column, ddof=1) / math.sqrt(n)), n, seed, rejected)


def iteration_series_state(
    s: int,
    t: float,
    f0: StateSeq,
    order_max: int,
    point: Configuration,
    quadrature: Optional[TimeQuadrature] = None,
    kernel: Optional[CollisionKernelSpec] = None,
    n_samples: int = 2000,
    seed: int = 0,
    stream: int = 0,
) -> IterationSeriesResult:
    """Iterated Duhamel series for F_s(t) at one point through order_max ≤ 2.

    Order n carries n nested collision terms between interacting groups:
    S*_s(t - t1) C S*_{s+1}(t1 - t2) C ... S*_{s+n}(t_n) F⁰_{s+n}.
    """
    if not 0 <= order_max <= MAX_ITERATION_ORDER:
        raise ValueError(f"order_max must be in 0..{MAX_ITERATION_ORDER}")
    if point.n != s:
        raise ValueError(f"point has {point.n} particles, expected {s}")
    quadrature = quadrature or TimeQuadrature()
    kernel = kernel or CollisionKernelSpec()
    result = IterationSeriesResult(s, t)

    leading = f0.terms(s)
    leading_exact = all(term.n_free == 0 for term in leading)
    if leading_exact:
        value = sum(term.weight * ZeroOnForbidden(Transported(term.density, t, point.sigma), point.sigma)(point.positions, point.momenta) for term in leading)
        result.orders.append(MCEstimate.exact(value, seed))
        result.quadrature_tolerance.append(0.0)
    if leading_exact and (t == 0.0 or order_max == 0):
        for _ in range(order_max):
            result.orders.append(MCEstimate.exact(0.0, seed))
            result.quadrature_tolerance.append(0.0)
        result.total = MCEstimate.exact(result.orders[0].value, seed)
        if order_max and t == 0.0:
            logger.debug(f"iteration series at t=0 returns F0_{s} unchanged")
        return result

    rows = _free_rows(f0, s, order_max)
    refine = quadrature.refine and t != 0.0
    first_rules = [quadrature.rule(t)] + ([quadrature.rule(t, True)] if refine else [])
    second_rules = [quadrature.simplex_rule(t)] + ([quadrature.simplex_rule(t, True)] if refine else [])

    def sample(rng: np.random.Generator) -> np.ndarray:
        yq, yp = f0.spec.draw(rng, rows)
        values = []
        if not leading_exact:
            values.append(_Marginal(leading, f0.spec, yq, yp).at(t)(point.positions, point.momenta))
        if order_max >= 1:
            marginal = _Marginal(f0.terms(s + 1), f0.spec, yq, yp)
            p_new = kernel.draw_momentum(rng)
            directions, weights = kernel.directions(rng)
            for rule in first_rules:
                values.append(0.0 if t == 0.0 else _first_order(point, t, marginal, rule, kernel, p_new, directions, weights))
        if order_max >= 2:
            marginal = _Marginal(f0.terms(s + 2), f0.spec, yq, yp)
            draws = (kernel.draw_momentum(rng), random_direction(rng), kernel.draw_momentum(rng), random_direction(rng))
            for nodes in second_rules:
                values.append(0.0 if t == 0.0 else _second_order(point, t, marginal, nodes, kernel, draws))
        return np.array(values)

    values, rejected = run_chunks(sample, n_samples, seed, (stream, 211, s))
    column = 0
    total = np.zeros(n_samples)
    if not leading_exact:
        result.orders.append(_estimate(values[:, 0], seed, rejected))
        result.quadrature_tolerance.append(0.0)
        total += values[:, 0]
        column = 1
    else:
        total += result.orders[0].value

    for order in range(1, order_max + 1):
        coarse = values[:, column]
        best = values[:, column + 1] if refine else coarse
        column += 2 if refine else 1
        estimate = _estimate(best, seed, rejected)
        tolerance = abs(float(best.mean() - coarse.mean()))
        result.orders.append(estimate)
        result.quadrature_tolerance.append(tolerance)
        total += best
        if refine:
            difference = _estimate(best - coarse, seed, rejected)
            if tolerance > 3.0 * difference.stderr and tolerance > quadrature.rtol * max(abs(estimate.value), estimate.stderr):
                message = (
                    f"order {order}: {quadrature.nodes}- and {2 * quadrature.nodes}-node rules differ by "
                    f"{tolerance:.3g} ({difference.stderr:.2g} sampling error)"
                )
                result.refinement_report.append(message)
                logger.warning(f"Time quadrature refinement disagrees at s={s}, t={t}: {message}")
        logger.debug(f"iteration order {order}: {estimate.value:.6g} ± {estimate.stderr:.2g}")

    result.total = _estimate(total, seed, rejected)
    return result
