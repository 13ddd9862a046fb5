import logging
import math
from typing import List, Optional, Sequence, Tuple

from .symbols import FormalSum, OperatorSymbol, SymbolKind, group_symbol
from ..combinatorics.partitions import (
    ClusterElement,
    Label,
    cumulant_coefficient,
    iter_partitions,
    subsets,
)


logger = logging.getLogger(__name__)


def cumulant_expansion(
    elements: Sequence[ClusterElement],
    starred: bool = False,
    perturbation: int = 0,
) -> FormalSum:
    """Σ_P (-1)^{|P|-1}(|P|-1)! Π S(θ(X_i)) over partitions of the cluster elements.

    perturbation shifts the coefficient of the finest partition; it exists
    only for the negative control of the algebra verification.
    """
    total = FormalSum.zero()
    for partition in iter_partitions(list(elements)):
        coefficient = cumulant_coefficient(partition)
        if perturbation and len(partition) == len(elements) and len(elements) > 2:
            coefficient += perturbation
        product = FormalSum.one().scale(coefficient)
        for labels in partition.block_labels():
            product = product * group_symbol(labels, starred)
        total = total + product
    return total


def cluster_expansion(elements: Sequence[ClusterElement], starred: bool = False) -> FormalSum:
    """Σ_P Π 𝔄(X_i): the group operator of θ(elements) over cumulant symbols."""
    total = FormalSum.zero()
    for partition in iter_partitions(list(elements)):
        symbols = tuple(OperatorSymbol.cumulant(block, starred) for block in partition.blocks)
        total = total + FormalSum.of(*symbols)
    return total


def expand_cumulant_symbols(expression: FormalSum, perturbation: int = 0) -> FormalSum:
    """Replace every 𝔄 symbol by its partition expansion over group symbols."""

    def rule(symbol: OperatorSymbol) -> Optional[FormalSum]:
        if symbol.kind != SymbolKind.A:
            return None
        return cumulant_expansion(symbol.argument, symbol.starred, perturbation)

    return expression.substitute(rule)


def dual_ground(s: int, removed: Sequence[Label]) -> Tuple[Optional[ClusterElement], List[ClusterElement]]:
    labels = range(1, s + 1)
    if len(set(removed)) != len(removed):
        raise ValueError(f"labels {tuple(removed)} are not distinct")
    if any(label not in labels for label in removed):
        raise ValueError(f"labels {tuple(removed)} not within 1..{s}")
    rest = [label for label in labels if label not in removed]
    cluster = ClusterElement.cluster(rest) if rest else None
    return cluster, [ClusterElement.label(label) for label in removed]


def dual_cumulant(s: int, n: int, removed: Sequence[Label], perturbation: int = 0) -> FormalSum:
    """𝔄_{1+n}(t, {(1..s)∖J}, j_1..j_n) over group symbols S."""
    if len(removed) != n:
        raise ValueError(f"expected {n} removed labels, got {len(removed)}")
    if n > s:
        raise ValueError(f"cannot remove {n} labels out of {s}")
    cluster, singles = dual_ground(s, removed)
    if cluster is None:
        # The empty cluster carries the identity; pairing it alone or with any
        # block gives coefficients that cancel partition by partition.
        return FormalSum.zero()
    return cumulant_expansion([cluster] + singles, starred=False, perturbation=perturbation)


def state_ground(s: int, n: int) -> List[ClusterElement]:
    if s < 1 or n < 0:
        raise ValueError("state cumulants need s >= 1 and n >= 0")
    return [ClusterElement.cluster(range(1, s + 1))] + [
        ClusterElement.label(label) for label in range(s + 1, s + n + 1)
    ]


def state_cumulant(s: int, n: int, perturbation: int = 0) -> FormalSum:
    """𝔄*_{1+n}(t, {1..s}, s+1..s+n) over adjoint group symbols S*."""
    return cumulant_expansion(state_ground(s, n), starred=True, perturbation=perturbation)


def reduced_cumulant(s: int, n: int, side: str = "dual") -> FormalSum:
    """Binomial form Σ_k (-1)^k C(n,k) S_{m-k}(1..m-k) with m = s (dual) or s+n (state)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if side == "dual":
        if n > s - 1:
            raise ValueError(f"dual reduced cumulant of order {1 + n} needs s > {n}")
        top, starred = s, False
    elif side == "state":
        top, starred = s + n, True
    else:
        raise ValueError(f"unknown side {side!r}")
    total = FormalSum.zero()
    for k in range(0, n + 1):
        total = total + group_symbol(range(1, top - k + 1), starred).scale((-1) ** k * math.comb(n, k))
    return total


def reduced_cumulant_subsets(rest: Sequence[Label], tail: Sequence[Label], starred: bool = False) -> FormalSum:
    """Σ_{W⊆tail} (-1)^{|tail∖W|} S(rest ∪ W)."""
    total = FormalSum.zero()
    for chosen in subsets(tail):
        sign = (-1) ** (len(tail) - len(chosen))
        total = total + group_symbol(tuple(rest) + chosen, starred).scale(sign)
    return total


def second_order_reduction(s: int, n: int, removed: Optional[Sequence[Label]] = None) -> FormalSum:
    """𝔄_{1+n} written over first and second order cumulants, n >= 2.

    Σ_{∅≠Y⊆J} 𝔄_2({R},{Y}) Σ_{P: J∖Y} (-1)^{|P|}|P|! Π 𝔄_1({X_i})
    """
    if n < 2:
        raise ValueError("second order reduction is stated for n >= 2")
    if removed is None:
        removed = tuple(range(s - n + 1, s + 1))
    cluster, singles = dual_ground(s, removed)
    if cluster is None:
        raise ValueError("second order reduction needs a non-empty remaining cluster")
    total = FormalSum.zero()
    for chosen in subsets(removed):
        if not chosen:
            continue
        pair = OperatorSymbol.cumulant([cluster, ClusterElement.cluster(chosen)])
        leftover = [label for label in removed if label not in chosen]
        if not leftover:
            total = total + FormalSum.of(pair)
            continue
        for partition in iter_partitions(leftover):
            weight = (-1) ** len(partition) * math.factorial(len(partition))
            firsts = [OperatorSymbol.cumulant([ClusterElement.cluster(labels)]) for labels in partition.block_labels()]
            total = total + FormalSum.of(pair, *firsts, coefficient=weight)
    return total


def collapsed_second_order(s: int, n: int, removed: Optional[Sequence[Label]] = None) -> FormalSum:
    """Second order form acting on functions of the remaining labels: Σ_{Y≠∅} (-1)^{|J∖Y|} 𝔄_2({R},{Y})."""
    if removed is None:
        removed = tuple(range(s - n + 1, s + 1))
    cluster, _ = dual_ground(s, removed)
    if cluster is None:
        raise ValueError("second order reduction needs a non-empty remaining cluster")
    total = FormalSum.zero()
    for chosen in subsets(removed):
        if not chosen:
            continue
        pair = OperatorSymbol.cumulant([cluster, ClusterElement.cluster(chosen)])
        total = total + FormalSum.of(pair, coefficient=(-1) ** (len(removed) - len(chosen)))
    return total

