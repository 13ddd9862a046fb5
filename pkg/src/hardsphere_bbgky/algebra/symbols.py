import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from ..combinatorics.partitions import ClusterElement, Label, declusterize


logger = logging.getLogger(__name__)


class IntegralityError(ArithmeticError):
    pass


class SymbolKind(Enum):
    S = "S"
    A = "A"
    U = "U"


@dataclass(frozen=True)
class OperatorSymbol:
    kind: SymbolKind
    argument: Tuple[ClusterElement, ...]
    order_tag: int
    starred: bool = False

    def __post_init__(self):
        if not self.argument:
            raise ValueError("operator symbol needs a non-empty argument")
        labels = [label for element in self.argument for label in element.labels]
        if len(labels) != len(set(labels)):
            raise ValueError(f"labels repeat inside symbol argument {self.argument}")
        object.__setattr__(self, "argument", tuple(sorted(self.argument)))

    def sort_key(self) -> Tuple:
        return (
            self.kind.value,
            self.starred,
            tuple((element.labels, element.wrapped) for element in self.argument),
            self.order_tag,
        )

    def __lt__(self, other: "OperatorSymbol") -> bool:
        return self.sort_key() < other.sort_key()

    @classmethod
    def group(cls, labels: Iterable[Label], starred: bool = False) -> "OperatorSymbol":
        elements = tuple(ClusterElement.label(label) for label in sorted(set(labels)))
        return cls(SymbolKind.S, elements, len(elements), starred)

    @classmethod
    def cumulant(cls, elements: Sequence[ClusterElement], starred: bool = False) -> "OperatorSymbol":
        return cls(SymbolKind.A, tuple(elements), len(elements), starred)

    @classmethod
    def reduced(cls, elements: Sequence[ClusterElement], starred: bool = False) -> "OperatorSymbol":
        return cls(SymbolKind.U, tuple(elements), len(elements), starred)

    def labels(self) -> FrozenSet[Label]:
        return declusterize(self.argument)

    def relabel(self, mapping: Mapping[Label, Label]) -> "OperatorSymbol":
        elements = []
        for element in self.argument:
            moved = tuple(mapping.get(label, label) for label in element.labels)
            elements.append(ClusterElement(moved, element.wrapped))
        if self.kind == SymbolKind.S:
            return OperatorSymbol.group([e.labels[0] for e in elements], self.starred)
        return OperatorSymbol(self.kind, tuple(elements), self.order_tag, self.starred)

    def __str__(self) -> str:
        star = "*" if self.starred else ""
        if self.kind == SymbolKind.S:
            args = ",".join(str(label) for label in sorted(self.labels()))
        else:
            args = ",".join(str(element) for element in self.argument)
        return f"{self.kind.value}{star}_{self.order_tag}({args})"


Monomial = Tuple[OperatorSymbol, ...]
Coefficient = Union[int, Fraction]


def monomial_labels(monomial: Monomial) -> FrozenSet[Label]:
    labels: set = set()
    for symbol in monomial:
        labels.update(symbol.labels())
    return frozenset(labels)


def multiply_monomials(left: Monomial, right: Monomial) -> Monomial:
    return tuple(sorted(left + right))


def format_monomial(monomial: Monomial) -> str:
    if not monomial:
        return "1"
    return "·".join(str(symbol) for symbol in monomial)


class FormalSum:
    """Exact linear combination of commuting products of operator symbols."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[Monomial, Coefficient]] = None):
        self.terms: Dict[Monomial, Fraction] = {}
        if terms:
            for monomial, coefficient in terms.items():
                self._accumulate(tuple(sorted(monomial)), Fraction(coefficient))

    def _accumulate(self, monomial: Monomial, coefficient: Fraction):
        if coefficient == 0:
            return
        total = self.terms.get(monomial, Fraction(0)) + coefficient
        if total == 0:
            self.terms.pop(monomial, None)
        else:
            self.terms[monomial] = total

    @classmethod
    def zero(cls) -> "FormalSum":
        return cls()

    @classmethod
    def one(cls) -> "FormalSum":
        return cls({(): 1})

    @classmethod
    def of(cls, *symbols: OperatorSymbol, coefficient: Coefficient = 1) -> "FormalSum":
        return cls({tuple(symbols): coefficient})

    def copy(self) -> "FormalSum":
        result = FormalSum()
        result.terms = dict(self.terms)
        return result

    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(sorted(self.terms.items()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FormalSum):
            return NotImplemented
        return self.terms == other.terms

    def __add__(self, other: "FormalSum") -> "FormalSum":
        result = self.copy()
        for monomial, coefficient in other.terms.items():
            result._accumulate(monomial, coefficient)
        return result

    def __neg__(self) -> "FormalSum":
        return self.scale(-1)

    def __sub__(self, other: "FormalSum") -> "FormalSum":
        return self + (-other)

    def scale(self, factor: Coefficient) -> "FormalSum":
        factor = Fraction(factor)
        result = FormalSum()
        if factor == 0:
            return result
        result.terms = {m: c * factor for m, c in self.terms.items()}
        return result

    def __mul__(self, other: "FormalSum") -> "FormalSum":
        if not isinstance(other, FormalSum):
            return self.scale(other)
        result = FormalSum()
        for left, a in self.terms.items():
            for right, b in other.terms.items():
                if monomial_labels(left) & monomial_labels(right):
                    raise ValueError(
                        f"factors {format_monomial(left)} and {format_monomial(right)} share labels"
                    )
                result._accumulate(multiply_monomials(left, right), a * b)
        return result

    __rmul__ = scale

    def coefficient(self, monomial: Sequence[OperatorSymbol]) -> Fraction:
        return self.terms.get(tuple(sorted(monomial)), Fraction(0))

    def relabel(self, mapping: Mapping[Label, Label]) -> "FormalSum":
        result = FormalSum()
        for monomial, coefficient in self.terms.items():
            moved = tuple(sorted(symbol.relabel(mapping) for symbol in monomial))
            result._accumulate(moved, coefficient)
        return result

    def embed(self, mapping: Mapping[Label, Sequence[Label]]) -> "FormalSum":
        """Replace every label by a set of labels inside group symbols.

        Used to identify a component of a formal logarithm, written on
        consecutive labels, with a cumulant whose first element is a cluster.
        """
        result = FormalSum()
        for monomial, coefficient in self.terms.items():
            symbols = []
            for symbol in monomial:
                if symbol.kind != SymbolKind.S:
                    raise ValueError("only group symbols can be embedded")
                labels: List[Label] = []
                for label in symbol.labels():
                    labels.extend(mapping.get(label, (label,)))
                symbols.append(OperatorSymbol.group(labels, symbol.starred))
            result._accumulate(tuple(sorted(symbols)), coefficient)
        return result

    def substitute(self, rule: Callable[[OperatorSymbol], Optional["FormalSum"]]) -> "FormalSum":
        """Expand every symbol for which rule returns a FormalSum."""
        result = FormalSum()
        for monomial, coefficient in self.terms.items():
            product = FormalSum.one().scale(coefficient)
            for symbol in monomial:
                replacement = rule(symbol)
                if replacement is None:
                    replacement = FormalSum.of(symbol)
                product = product * replacement
            result = result + product
        return result

    def acting_on(self, labels: Iterable[Label]) -> "FormalSum":
        """Drop factors whose labels are disjoint from the given ones.

        Such factors act as the identity on functions of those labels and,
        for states, leave integrals over their own variables unchanged.
        """
        keep = frozenset(labels)
        result = FormalSum()
        for monomial, coefficient in self.terms.items():
            reduced = tuple(symbol for symbol in monomial if symbol.labels() & keep)
            result._accumulate(reduced, coefficient)
        return result

    def symmetrized(self, fixed: Sequence[Label]) -> "FormalSum":
        """Renumber the non-fixed labels of each product consecutively.

        Valid under a test function symmetric in the non-fixed labels; maps
        S(1..r ∪ Y) to S(1..r+|Y|) when fixed = 1..r.
        """
        fixed_set = set(fixed)
        start = max(fixed_set) if fixed_set else 0
        result = FormalSum()
        for monomial, coefficient in self.terms.items():
            free = sorted(monomial_labels(monomial) - fixed_set)
            mapping = {label: start + i + 1 for i, label in enumerate(free)}
            moved = tuple(sorted(symbol.relabel(mapping) for symbol in monomial))
            result._accumulate(moved, coefficient)
        return result

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self.terms.values())

    def assert_integral(self, context: str = "") -> "FormalSum":
        for monomial, coefficient in self.terms.items():
            if coefficient.denominator != 1:
                raise IntegralityError(
                    f"non-integer coefficient {coefficient} at {format_monomial(monomial)} {context}".strip()
                )
        return self

    def coefficients(self) -> List[int]:
        return sorted(int(c) for c in self.terms.values() if c.denominator == 1)

    def __repr__(self) -> str:
        return f"FormalSum({str(self)})"

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for monomial, coefficient in self:
            sign = "-" if coefficient < 0 else "+"
            magnitude = abs(coefficient)
            prefix = "" if magnitude == 1 else f"{magnitude}·"
            parts.append(f"{sign} {prefix}{format_monomial(monomial)}")
        text = " ".join(parts)
        return text[2:] if text.startswith("+ ") else text


def group_symbol(labels: Iterable[Label], starred: bool = False) -> FormalSum:
    labels = list(labels)
    if not labels:
        return FormalSum.one()
    return FormalSum.of(OperatorSymbol.group(labels, starred))
