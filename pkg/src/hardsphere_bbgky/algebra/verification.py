import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .cumulants import (
    cluster_expansion,
    collapsed_second_order,
    dual_cumulant,
    dual_ground,
    expand_cumulant_symbols,
    reduced_cumulant,
    reduced_cumulant_subsets,
    second_order_reduction,
    state_cumulant,
    state_ground,
)
from .sequences import OperatorSequence, exp_star, ln_star, without_unit
from .symbols import FormalSum, OperatorSymbol, SymbolKind, format_monomial, group_symbol
from ..combinatorics.partitions import (
    ClusterElement,
    alternating_partition_sum,
    alternating_partition_sum_enumerated,
    bell_number,
    cumulant_coefficient,
    cumulant_coefficient_sum,
    iter_partitions,
    stirling2,
)


logger = logging.getLogger(__name__)


MAX_SYMBOLIC_ORDER = 6
MAX_LISTED_MONOMIALS = 5


@dataclass
class IdentityCheck:
    identity: str
    s: int
    n: int
    passed: bool
    residual: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "identity": self.identity,
            "s": self.s,
            "n": self.n,
            "passed": self.passed,
            "residual": self.residual,
        }


@dataclass
class IdentityReport:
    checks: List[IdentityCheck] = field(default_factory=list)
    elapsed_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> List[IdentityCheck]:
        return [check for check in self.checks if not check.passed]

    def extend(self, other: "IdentityReport"):
        self.checks.extend(other.checks)
        self.elapsed_seconds += other.elapsed_seconds

    def add(self, identity: str, s: int, n: int, passed: bool, residual: str = ""):
        self.checks.append(IdentityCheck(identity, s, n, passed, residual))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "elapsed_seconds": self.elapsed_seconds,
            "checks": [check.to_dict() for check in self.checks],
        }


def describe_residual(residual: FormalSum) -> str:
    if residual.is_zero():
        return ""
    listed = [f"{coefficient}·{format_monomial(monomial)}" for monomial, coefficient in residual][:MAX_LISTED_MONOMIALS]
    more = len(residual) - len(listed)
    text = "; ".join(listed)
    return f"{text}; ... {more} more" if more > 0 else text


def _compare(report: IdentityReport, identity: str, s: int, n: int, lhs: FormalSum, rhs: FormalSum):
    residual = lhs - rhs
    report.add(identity, s, n, residual.is_zero(), describe_residual(residual))
    if not residual.is_zero():
        logger.warning(f"{identity} fails at s={s}, n={n}: {describe_residual(residual)}")


def _check_order(n_max: int):
    if n_max < 1 or n_max > MAX_SYMBOLIC_ORDER:
        raise ValueError(f"symbolic sweeps run for 1 <= N_max <= {MAX_SYMBOLIC_ORDER}, got {n_max}")


def verify_combinatorial_identities(n_partitions: int = 10, n_alternating: int = 8, n_delta: int = 10) -> IdentityReport:
    started = time.perf_counter()
    report = IdentityReport()
    for n in range(1, n_partitions + 1):
        enumerated = sum(1 for _ in iter_partitions(list(range(1, n + 1))))
        report.add("partition count = Bell", n, 0, enumerated == bell_number(n), f"{enumerated} != {bell_number(n)}" if enumerated != bell_number(n) else "")
        total = sum(stirling2(n, k) for k in range(1, n + 1))
        report.add("Σ_k S(n,k) = Bell", n, 0, total == bell_number(n))
    for n in range(1, min(n_partitions, 8) + 1):
        grouped: Dict[int, int] = {}
        for partition in iter_partitions(list(range(1, n + 1))):
            grouped[len(partition)] = grouped.get(len(partition), 0) + cumulant_coefficient(partition)
        passed = all(grouped.get(k, 0) == cumulant_coefficient_sum(n, k) for k in range(1, n + 1))
        report.add("cumulant coefficients grouped by block count", n, 0, passed)
    for n in range(1, n_alternating + 1):
        value = alternating_partition_sum_enumerated(n)
        report.add("Σ_P (-1)^|P| |P|! = (-1)^n", n, 0, value == (-1) ** n, f"got {value}" if value != (-1) ** n else "")
    for n in range(n_alternating + 1, 11):
        value = alternating_partition_sum(n)
        report.add("Σ_P (-1)^|P| |P|! = (-1)^n", n, 0, value == (-1) ** n)
    for s in range(1, n_delta + 1):
        value = sum((-1) ** (k - 1) * stirling2(s, k) * math.factorial(k - 1) for k in range(1, s + 1))
        expected = 1 if s == 1 else 0
        report.add("Σ_k (-1)^{k-1} S(s,k)(k-1)! = δ_{s,1}", s, 0, value == expected, f"got {value}" if value != expected else "")
    report.elapsed_seconds = time.perf_counter() - started
    return report


def verify_cluster_inversion(n_max: int = MAX_SYMBOLIC_ORDER, perturbation: int = 0) -> IdentityReport:
    """Substitute the cumulants into the cluster expansion and expect the bare group symbol.

    Both sides are swept: the dual ground ({1..s}, s+1..s+n) with S and
    the state ground with S*, for all s >= 1, n >= 0, s + n <= n_max.
    """
    _check_order(n_max)
    started = time.perf_counter()
    report = IdentityReport()
    for total in range(1, n_max + 1):
        for s in range(1, total + 1):
            n = total - s
            removed = tuple(range(s + 1, total + 1))
            cluster, singles = dual_ground(total, removed)
            dual = expand_cumulant_symbols(cluster_expansion([cluster] + singles), perturbation)
            _compare(report, "cluster expansion inverts dual cumulants", s, n, dual, group_symbol(range(1, total + 1)))

            state = expand_cumulant_symbols(cluster_expansion(state_ground(s, n), starred=True), perturbation)
            _compare(report, "cluster expansion inverts state cumulants", s, n, state, group_symbol(range(1, total + 1), True))

            cumulant = dual_cumulant(total, n, removed)
            passed = len(cumulant) == bell_number(n + 1)
            report.add("dual cumulant has Bell(n+1) terms", s, n, passed, "" if passed else f"{len(cumulant)} terms")
    report.elapsed_seconds = time.perf_counter() - started
    return report


def random_integer_sequence(n_max: int, seed: int, starred: bool = False) -> OperatorSequence:
    rng = np.random.default_rng(seed)
    components = {}
    for n in range(1, n_max + 1):
        elements = tuple(ClusterElement.label(label) for label in range(1, n + 1))
        first = OperatorSymbol(SymbolKind.A, elements, n, starred)
        second = OperatorSymbol(SymbolKind.U, elements, n, starred)
        components[n] = FormalSum({(first,): int(rng.integers(-3, 4)), (second,): int(rng.integers(-3, 4))})
    return OperatorSequence(components, n_max)


def verify_exp_ln_roundtrip(n_max: int = MAX_SYMBOLIC_ORDER, seeds: Optional[List[int]] = None) -> IdentityReport:
    _check_order(n_max)
    started = time.perf_counter()
    report = IdentityReport()
    for starred in (False, True):
        side = "state" if starred else "dual"
        groups = OperatorSequence.group(n_max, starred)
        cumulants = ln_star(groups)
        rebuilt = exp_star(cumulants)
        expected = OperatorSequence.unit(n_max) + groups
        for n in range(0, n_max + 1):
            _compare(report, f"Exp⋆ Ln⋆ = identity ({side})", n, 0, rebuilt.component(n), expected.component(n))
        for total in range(1, n_max + 1):
            for s in range(1, total + 1):
                n = total - s
                embedding = {1: tuple(range(1, s + 1))}
                embedding.update({k: (s + k - 1,) for k in range(2, n + 2)})
                from_log = cumulants.component(n + 1).embed(embedding)
                direct = state_cumulant(s, n) if starred else dual_cumulant(total, n, tuple(range(s + 1, total + 1)))
                _compare(report, f"Ln⋆ component matches cumulant ({side})", s, n, from_log, direct)

    for seed in seeds if seeds is not None else [11, 12, 13]:
        u = random_integer_sequence(min(n_max, 5), seed)
        round_trip = ln_star(without_unit(exp_star(u)))
        for n in range(1, u.n_max + 1):
            _compare(report, f"Ln⋆ Exp⋆ = identity (seed {seed})", n, 0, round_trip.component(n), u.component(n))
    report.elapsed_seconds = time.perf_counter() - started
    return report


def verify_reduced_cumulants(n_max: int = MAX_SYMBOLIC_ORDER) -> IdentityReport:
    """Cumulants regrouped by the subsets joined to the fixed cluster give the reduced cumulants."""
    _check_order(n_max)
    started = time.perf_counter()
    report = IdentityReport()
    for total in range(1, n_max + 1):
        for s in range(1, total + 1):
            n = total - s
            rest = tuple(range(1, s + 1))
            tail = tuple(range(s + 1, total + 1))

            state = state_cumulant(s, n).acting_on(rest)
            _compare(report, "state cumulant regroups to subset form", s, n, state, reduced_cumulant_subsets(rest, tail, True))
            _compare(report, "state subset form symmetrizes to binomial form", s, n, state.symmetrized(rest), reduced_cumulant(s, n, "state"))

            dual = dual_cumulant(total, n, tail).acting_on(rest)
            _compare(report, "dual cumulant regroups to subset form", s, n, dual, reduced_cumulant_subsets(rest, tail))
            _compare(report, "dual subset form symmetrizes to binomial form", s, n, dual.symmetrized(rest), reduced_cumulant(total, n, "dual"))
    report.elapsed_seconds = time.perf_counter() - started
    return report


def verify_second_order(n_max: int = MAX_SYMBOLIC_ORDER) -> IdentityReport:
    _check_order(n_max)
    started = time.perf_counter()
    report = IdentityReport()
    for total in range(3, n_max + 1):
        for n in range(2, total):
            removed = tuple(range(total - n + 1, total + 1))
            rest = tuple(range(1, total - n + 1))
            reduction = second_order_reduction(total, n, removed)
            _compare(
                report,
                "second order form expands to the dual cumulant",
                total, n,
                expand_cumulant_symbols(reduction),
                dual_cumulant(total, n, removed),
            )
            _compare(
                report,
                "inner partition sums collapse to (-1)^|J∖Y|",
                total, n,
                reduction.acting_on(rest),
                collapsed_second_order(total, n, removed),
            )
    report.elapsed_seconds = time.perf_counter() - started
    return report


def verify_algebra(n_max: int = MAX_SYMBOLIC_ORDER, perturbation: int = 0) -> IdentityReport:
    report = IdentityReport()
    report.extend(verify_combinatorial_identities())
    report.extend(verify_cluster_inversion(n_max, perturbation))
    report.extend(verify_exp_ln_roundtrip(n_max))
    report.extend(verify_reduced_cumulants(n_max))
    report.extend(verify_second_order(n_max))
    logger.info(
        f"Algebra checks: {len(report.checks) - len(report.failures())}/{len(report.checks)} passed "
        f"in {report.elapsed_seconds:.2f}s"
    )
    return report
