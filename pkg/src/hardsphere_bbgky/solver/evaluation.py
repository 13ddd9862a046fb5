import logging
from functools import lru_cache
from typing import Callable, FrozenSet, Optional, Sequence, Tuple

import numpy as np

from ..algebra.cumulants import (
    collapsed_second_order,
    cumulant_expansion,
    dual_cumulant,
    expand_cumulant_symbols,
    reduced_cumulant_subsets,
    state_cumulant,
)
from ..algebra.symbols import FormalSum, SymbolKind
from ..combinatorics.partitions import ClusterElement, Label
from ..dynamics.flow import ClusterFlowCache


logger = logging.getLogger(__name__)


PhaseFunction = Callable[[np.ndarray, np.ndarray], float]
CompiledSum = Tuple[Tuple[float, Tuple[FrozenSet[Label], ...]], ...]


def compile_group_sum(expression: FormalSum) -> CompiledSum:
    """(coefficient, label blocks) per monomial of a sum of group-operator products."""
    compiled = []
    for monomial, coefficient in expression:
        blocks = []
        for symbol in monomial:
            if symbol.kind != SymbolKind.S:
                raise ValueError(f"only group symbols can be evaluated, got {symbol}")
            blocks.append(symbol.labels())
        compiled.append((float(coefficient), tuple(blocks)))
    return tuple(compiled)


def evaluate_compiled(
    compiled: CompiledSum,
    func: PhaseFunction,
    cache: ClusterFlowCache,
    argument: Sequence[Label],
) -> float:
    """Σ coefficient·func(argument rows after the block flows).

    Label l is row l-1 of the cache configuration. Blocks disjoint from the
    argument leave func unchanged and are skipped; argument labels outside
    every block keep their initial phase point. A block starting in a
    forbidden configuration makes its monomial vanish.
    """
    configuration = cache.configuration
    argument = list(argument)
    total = 0.0
    for coefficient, blocks in compiled:
        q = np.array([configuration.positions[label - 1] for label in argument]).reshape(-1, 3)
        p = np.array([configuration.momenta[label - 1] for label in argument]).reshape(-1, 3)
        vanished = False
        for block in blocks:
            if block.isdisjoint(argument):
                continue
            ordered = sorted(block)
            evolved = cache.flow(label - 1 for label in ordered)
            if evolved is None:
                vanished = True
                break
            for row, label in enumerate(argument):
                if label in block:
                    position = ordered.index(label)
                    q[row] = evolved.positions[position]
                    p[row] = evolved.momenta[position]
        if vanished:
            continue
        total += coefficient * float(func(q, p))
    return total


@lru_cache(maxsize=4096)
def compiled_dual_cumulant(s: int, removed: Tuple[Label, ...]) -> CompiledSum:
    return compile_group_sum(dual_cumulant(s, len(removed), removed))


@lru_cache(maxsize=4096)
def compiled_reduced_subsets(rest: Tuple[Label, ...], tail: Tuple[Label, ...], starred: bool) -> CompiledSum:
    return compile_group_sum(reduced_cumulant_subsets(rest, tail, starred))


@lru_cache(maxsize=4096)
def compiled_second_order(s: int, removed: Tuple[Label, ...]) -> CompiledSum:
    """𝔄_{1+n} through first and second order cumulants, n >= 2, expanded to group symbols."""
    return compile_group_sum(expand_cumulant_symbols(collapsed_second_order(s, len(removed), removed)))


@lru_cache(maxsize=256)
def compiled_state_cumulant(s: int, n: int) -> CompiledSum:
    return compile_group_sum(state_cumulant(s, n))


@lru_cache(maxsize=256)
def compiled_singleton_cumulant(s: int) -> CompiledSum:
    """𝔄_s(1, ..., s) over single labels."""
    elements = [ClusterElement.label(label) for label in range(1, s + 1)]
    return compile_group_sum(cumulant_expansion(elements))


def complement(s: int, removed: Sequence[Label]) -> Tuple[Label, ...]:
    removed = set(removed)
    return tuple(label for label in range(1, s + 1) if label not in removed)


def joined(density: PhaseFunction, q_tail: Optional[np.ndarray], p_tail: Optional[np.ndarray]) -> PhaseFunction:
    """x ↦ density(x ⊕ tail): appends fixed extra rows after the evaluated ones."""
    if q_tail is None or len(q_tail) == 0:
        return density

    def func(q: np.ndarray, p: np.ndarray) -> float:
        return float(density(np.vstack([q, q_tail]), np.vstack([p, p_tail])))

    return func
