"""Consistency checks of the solution expansions: duality, generator, norm bound, semigroup, number conservation."""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .dual import DualSolutionRequest, dual_solution_B, dual_value, evolved_observable
from .evaluation import compiled_dual_cumulant, complement, evaluate_compiled
from ..combinatorics.partitions import cumulant_norm_bound, cumulant_norm_ceiling
from ..dynamics.flow import ClusterFlowCache, act_on_observable, free_contact_time
from ..dynamics.models import Configuration, PathologyError
from ..functionals.sampling import ChannelSet, MCEstimate, PhaseFunction, SamplingSpec, overlaps, stream_rng
from ..functionals.sequences import ObservableSeq, StateSeq, add_pairing_channels, reduce_state


logger = logging.getLogger(__name__)


MIN_GENERATOR_STEP = 1e-6
CONTACT_SAFETY = 4.0


class GeneratorDomainError(ValueError):
    """The point is too close to a contact, or the step is below resolution."""


@dataclass
class DualityReport:
    t: float
    evolved_observable: MCEstimate
    evolved_state: MCEstimate
    difference: MCEstimate
    k: float = 3.0

    @property
    def passed(self) -> bool:
        return abs(self.difference.value) <= self.k * self.difference.stderr

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["passed"] = self.passed
        return data


def duality_check(
    b0: ObservableSeq,
    d: StateSeq,
    t: float,
    n_samples: int = 4000,
    seed: int = 0,
    f0: Optional[StateSeq] = None,
    route: str = "cumulant",
    stream: int = 0,
) -> DualityReport:
    """(B(t), F(0)) against (B(0), F(t)) on shared samples, F = reduce_state(D) and F(t) = reduce_state(S*(t)D)."""
    f0 = f0 if f0 is not None else reduce_state(d, n_samples, seed)
    channels = ChannelSet(f0.spec, "lebesgue")
    right = add_pairing_channels(channels, b0, f0, "state", t)
    if t == 0.0:
        estimate = channels.estimate(n_samples, seed, stream).combine(right) if right else MCEstimate.exact(0.0, seed)
        return DualityReport(t, estimate, estimate, MCEstimate.exact(0.0, seed))

    left = add_pairing_channels(channels, evolved_observable(b0, t, route), f0, "observable")
    result = channels.estimate(n_samples, seed, stream)
    difference = dict(left)
    for key, value in right.items():
        difference[key] = difference.get(key, 0.0) - value
    report = DualityReport(t, result.combine(left), result.combine(right), result.combine(difference))
    logger.info(
        f"Duality at t={t}: (B(t),F(0)) = {report.evolved_observable.value:.6g}, "
        f"(B(0),F(t)) = {report.evolved_state.value:.6g}, difference {report.difference.value:.3g} ± {report.difference.stderr:.2g}"
    )
    return report


@dataclass
class GeneratorReport:
    steps: List[float]
    differences: List[float]
    reference: float
    errors: List[float]
    rate: Optional[float]
    exact: bool = False

    def rate_within(self, expected: float = 2.0, tolerance: float = 0.1) -> bool:
        if self.exact:
            return True
        return self.rate is not None and abs(self.rate - expected) <= tolerance


def _free_value(func: PhaseFunction, c: Configuration, h: float) -> float:
    shifted = c.streamed(h)
    return float(func(shifted.positions, shifted.momenta))


def _reference_derivative(func: PhaseFunction, c: Configuration, h: float) -> float:
    """Fourth-order central stencil of the free-streaming derivative."""
    return (
        -_free_value(func, c, 2.0 * h) + 8.0 * _free_value(func, c, h) - 8.0 * _free_value(func, c, -h) + _free_value(func, c, -2.0 * h)
    ) / (12.0 * h)


def generator_consistency(
    func: PhaseFunction,
    c: Configuration,
    h_values: Sequence[float],
    side: str = "observable",
) -> GeneratorReport:
    """Central differences of the group action against Σ⟨p_i, ∂_{q_i}⟩ at a point away from contact.

    For side="state" the group S*(h) = S(-h) is differenced and the sign flipped.
    """
    if side not in ("observable", "state"):
        raise ValueError(f"side must be 'observable' or 'state', got {side!r}")
    steps = sorted((float(h) for h in h_values), reverse=True)
    if not steps or steps[-1] < MIN_GENERATOR_STEP:
        raise GeneratorDomainError(f"steps must be at least {MIN_GENERATOR_STEP:g}")
    reach = free_contact_time(c)
    if reach <= CONTACT_SAFETY * steps[0]:
        raise GeneratorDomainError(f"free contact within {reach:.3g}, steps up to {steps[0]:.3g} need {CONTACT_SAFETY}x margin")

    sign = 1.0 if side == "observable" else -1.0
    differences = [
        sign * (act_on_observable(func, c, sign * h) - act_on_observable(func, c, -sign * h)) / (2.0 * h) for h in steps
    ]
    reference = _reference_derivative(func, c, 0.25 * steps[-1])
    errors = [abs(value - reference) for value in differences]
    scale = max(abs(reference), 1.0)
    if max(errors) <= 1e-10 * scale:
        return GeneratorReport(steps, differences, reference, errors, None, exact=True)
    usable = [(h, e) for h, e in zip(steps, errors) if e > 1e-13 * scale]
    rate = None
    if len(usable) >= 2:
        rate = float(np.polyfit(np.log([h for h, _ in usable]), np.log([e for _, e in usable]), 1)[0])
    logger.debug(f"generator check: errors {errors}, rate {rate}")
    return GeneratorReport(steps, differences, reference, errors, rate)


def cumulant_action(b: PhaseFunction, rest: Sequence[int], tail: Sequence[int], t: float, point: Configuration) -> float:
    """𝔄_{1+n}(t, {rest}, tail) applied to b(x_rest) at the point, labels 1..s with s = |rest| + |tail|."""
    s = len(rest) + len(tail)
    if sorted(list(rest) + list(tail)) != list(range(1, s + 1)) or point.n != s:
        raise ValueError("rest and tail must partition the labels 1..s of the point")
    removed = tuple(sorted(tail))
    return evaluate_compiled(compiled_dual_cumulant(s, removed), b, ClusterFlowCache(point, t), complement(s, removed))


class _SupTracker:
    """Phase function wrapper remembering the largest |value| it returned."""

    def __init__(self, inner: PhaseFunction):
        self.inner = inner
        self.largest = 0.0

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        value = float(self.inner(q, p))
        self.largest = max(self.largest, abs(value))
        return value


@dataclass
class NormCheckRow:
    name: str
    n: int
    action_sup: float
    function_sup: float
    ratio: float
    ceiling: float
    combinatorial: int

    @property
    def passed(self) -> bool:
        return self.ratio <= self.ceiling


@dataclass
class NormCheckReport:
    t: float
    rows: List[NormCheckRow] = field(default_factory=list)

    @property
    def violations(self) -> List[NormCheckRow]:
        return [row for row in self.rows if not row.passed]

    @property
    def passed(self) -> bool:
        return not self.violations


def cumulant_norm_check(
    functions: Dict[str, PhaseFunction],
    t: float,
    spec: SamplingSpec,
    n_values: Sequence[int] = (0, 1, 2, 3),
    n_points: int = 200,
    seed: int = 0,
) -> NormCheckReport:
    """sup|𝔄_{1+n}(t) b| over sampled points against n!·e^{n+2} times the sup of |b| at every point b was evaluated."""
    report = NormCheckReport(t)
    for name, b in functions.items():
        for n in n_values:
            s = n + 1
            rest, tail = (1,), tuple(range(2, s + 1))
            tracker = _SupTracker(b)
            action_sup = 0.0
            rng = stream_rng(seed, 13, s)
            for _ in range(n_points):
                q, p = spec.draw(rng, s)
                if overlaps(q, spec.sigma):
                    continue
                try:
                    value = cumulant_action(tracker, rest, tail, t, Configuration(q, p, spec.sigma))
                except PathologyError:
                    continue
                action_sup = max(action_sup, abs(value))
            ratio = action_sup / tracker.largest if tracker.largest > 0.0 else 0.0
            row = NormCheckRow(name, n, action_sup, tracker.largest, ratio, cumulant_norm_ceiling(n), cumulant_norm_bound(n))
            report.rows.append(row)
            if not row.passed:
                logger.warning(f"Norm bound violated for {name}, n={n}: ratio {ratio:.4g} > {row.ceiling:.4g}")
    return report


def semigroup_gap(b0: ObservableSeq, point: Configuration, t1: float, t2: float, route: str = "cumulant") -> float:
    """|B(t1 + t2) - B(t2 applied to B(t1))| at one point."""
    direct = dual_value(b0, point, t1 + t2, route)
    staged = dual_value(evolved_observable(b0, t1, route), point, t2, route)
    return abs(direct - staged)


def semigroup_check(b0: ObservableSeq, points: Sequence[Configuration], t1: float, t2: float) -> float:
    gaps = []
    for point in points:
        try:
            gaps.append(semigroup_gap(b0, point, t1, t2))
        except PathologyError as error:
            logger.warning(f"Semigroup check skipped a point: {error}")
    return max(gaps, default=0.0)


def number_conservation(points_by_s: Dict[int, Sequence[Configuration]], times: Sequence[float], n_max: int, sigma: float = 1.0) -> float:
    """Largest |B_s(t) - δ_{s,1}| for B(0) the number observable (0, 1, 0, ...)."""
    b0 = ObservableSeq.number(n_max, sigma)
    worst = 0.0
    for s, points in points_by_s.items():
        target = 1.0 if s == 1 else 0.0
        for t in times:
            solution = dual_solution_B(DualSolutionRequest(s, t, b0, list(points)))
            values = [value for value in solution.values if not math.isnan(value)]
            if values:
                worst = max(worst, max(abs(value - target) for value in values))
    return worst
