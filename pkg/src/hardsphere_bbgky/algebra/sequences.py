import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional

from .symbols import FormalSum, OperatorSymbol, SymbolKind
from ..combinatorics.partitions import ClusterElement


logger = logging.getLogger(__name__)


@dataclass
class OperatorSequence:
    """Component n acts on the labels 1..n; only the unit carries a 0-component."""

    components: Dict[int, FormalSum] = field(default_factory=dict)
    n_max: int = 6

    def __post_init__(self):
        self.components = {n: c for n, c in self.components.items() if not c.is_zero() and n <= self.n_max}

    @classmethod
    def unit(cls, n_max: int) -> "OperatorSequence":
        return cls({0: FormalSum.one()}, n_max)

    @classmethod
    def group(cls, n_max: int, starred: bool = False) -> "OperatorSequence":
        """(0, S_1(1), S_2(1,2), ...)"""
        return cls(
            {n: FormalSum.of(OperatorSymbol.group(range(1, n + 1), starred)) for n in range(1, n_max + 1)},
            n_max,
        )

    @classmethod
    def symbolic(cls, kind: SymbolKind, n_max: int, starred: bool = False) -> "OperatorSequence":
        components = {}
        for n in range(1, n_max + 1):
            elements = [ClusterElement.label(label) for label in range(1, n + 1)]
            components[n] = FormalSum.of(OperatorSymbol(kind, tuple(elements), n, starred))
        return cls(components, n_max)

    def component(self, n: int) -> FormalSum:
        return self.components.get(n, FormalSum.zero())

    def __add__(self, other: "OperatorSequence") -> "OperatorSequence":
        n_max = min(self.n_max, other.n_max)
        keys = set(self.components) | set(other.components)
        return OperatorSequence({n: self.component(n) + other.component(n) for n in keys}, n_max)

    def __sub__(self, other: "OperatorSequence") -> "OperatorSequence":
        return self + other.scale(-1)

    def scale(self, factor) -> "OperatorSequence":
        return OperatorSequence({n: c.scale(factor) for n, c in self.components.items()}, self.n_max)

    def truncated(self, n_max: int) -> "OperatorSequence":
        return OperatorSequence(dict(self.components), min(n_max, self.n_max))

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorSequence):
            return NotImplemented
        n_max = min(self.n_max, other.n_max)
        keys = {n for n in set(self.components) | set(other.components) if n <= n_max}
        return all(self.component(n) == other.component(n) for n in keys)

    def is_integral(self) -> bool:
        return all(c.is_integral() for c in self.components.values())

    def __str__(self) -> str:
        return "; ".join(f"[{n}] {self.components[n]}" for n in sorted(self.components))


def _placed(component: FormalSum, labels) -> FormalSum:
    """Component written on 1..k moved onto the given (sorted) labels."""
    mapping = {i + 1: label for i, label in enumerate(labels)}
    return component.relabel(mapping)


def star_product(u: OperatorSequence, v: OperatorSequence) -> OperatorSequence:
    n_max = min(u.n_max, v.n_max)
    components: Dict[int, FormalSum] = {}
    for s in range(0, n_max + 1):
        labels = tuple(range(1, s + 1))
        total = FormalSum.zero()
        for size in range(0, s + 1):
            left = u.component(size)
            right = v.component(s - size)
            if left.is_zero() or right.is_zero():
                continue
            for chosen in itertools.combinations(labels, size):
                rest = tuple(label for label in labels if label not in chosen)
                total = total + _placed(left, chosen) * _placed(right, rest)
        if not total.is_zero():
            components[s] = total
    return OperatorSequence(components, n_max)


def _check_no_unit(u: OperatorSequence, name: str):
    if not u.component(0).is_zero():
        raise ValueError(f"{name} expects a sequence without 0-component")


def exp_star(u: OperatorSequence, n_max: Optional[int] = None) -> OperatorSequence:
    """𝕀 + Σ_n u^{⋆n}/n!, truncated at n_max."""
    n_max = u.n_max if n_max is None else min(n_max, u.n_max)
    u = u.truncated(n_max)
    _check_no_unit(u, "exp_star")
    result = OperatorSequence.unit(n_max)
    power = OperatorSequence.unit(n_max)
    for n in range(1, n_max + 1):
        power = star_product(power, u)
        term = power.scale(Fraction(1, math.factorial(n)))
        for s, component in term.components.items():
            component.assert_integral(f"in exp_star power {n}, component {s}")
        result = result + term
    return result


def ln_star(w: OperatorSequence, n_max: Optional[int] = None) -> OperatorSequence:
    """Σ_n (-1)^{n-1}/n w^{⋆n}: the formal logarithm of 𝕀 + w."""
    n_max = w.n_max if n_max is None else min(n_max, w.n_max)
    w = w.truncated(n_max)
    _check_no_unit(w, "ln_star")
    result = OperatorSequence({}, n_max)
    power = OperatorSequence.unit(n_max)
    for n in range(1, n_max + 1):
        power = star_product(power, w)
        term = power.scale(Fraction((-1) ** (n - 1), n))
        for s, component in term.components.items():
            component.assert_integral(f"in ln_star power {n}, component {s}")
        result = result + term
    return result


def without_unit(w: OperatorSequence) -> OperatorSequence:
    return OperatorSequence({n: c for n, c in w.components.items() if n != 0}, w.n_max)
