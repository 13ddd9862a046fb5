import math
import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import FrozenSet, Iterable, Iterator, List, Sequence, Tuple, Union


logger = logging.getLogger(__name__)


MAX_GROUND_SIZE = 12
MAX_STIRLING_ARG = 30


class PartitionSizeError(ValueError):
    pass


Label = int


@dataclass(frozen=True, order=True)
class ClusterElement:
    """One element of a ground set: a bare particle label or a wrapped cluster {..}.

    A wrapped cluster is treated as a single element by the partition
    enumeration; declusterize() flattens it back to its label set.
    """

    labels: Tuple[Label, ...]
    wrapped: bool = False

    def __post_init__(self):
        if not self.labels:
            raise ValueError("cluster element needs at least one label")
        ordered = tuple(sorted(set(self.labels)))
        if len(ordered) != len(self.labels):
            raise ValueError(f"duplicate labels in cluster element {self.labels}")
        object.__setattr__(self, "labels", ordered)
        if len(ordered) == 1:
            object.__setattr__(self, "wrapped", False)
        if any(label < 1 for label in ordered):
            raise ValueError(f"labels must be positive integers: {self.labels}")

    @classmethod
    def label(cls, label: Label) -> "ClusterElement":
        return cls((label,))

    @classmethod
    def cluster(cls, labels: Iterable[Label]) -> "ClusterElement":
        return cls(tuple(labels), wrapped=True)

    def label_set(self) -> FrozenSet[Label]:
        return frozenset(self.labels)

    def __str__(self) -> str:
        if self.wrapped:
            return "{" + ",".join(str(label) for label in self.labels) + "}"
        return str(self.labels[0])


ElementLike = Union[ClusterElement, Label]


def as_element(item: ElementLike) -> ClusterElement:
    if isinstance(item, ClusterElement):
        return item
    return ClusterElement.label(int(item))


def declusterize(elements: Iterable[ClusterElement]) -> FrozenSet[Label]:
    """θ: union of the label sets of the given cluster elements."""
    labels: set = set()
    for element in elements:
        labels.update(element.labels)
    return frozenset(labels)


@dataclass(frozen=True)
class Partition:
    blocks: Tuple[Tuple[ClusterElement, ...], ...]

    def __len__(self) -> int:
        return len(self.blocks)

    def block_labels(self) -> List[FrozenSet[Label]]:
        return [declusterize(block) for block in self.blocks]

    def block_of(self, element: ClusterElement) -> Tuple[ClusterElement, ...]:
        for block in self.blocks:
            if element in block:
                return block
        raise KeyError(element)

    def __str__(self) -> str:
        return "".join("(" + ",".join(str(e) for e in block) + ")" for block in self.blocks)


def _check_ground(ground: Sequence[ClusterElement]):
    if not ground:
        raise PartitionSizeError("ground set is empty")
    if len(ground) > MAX_GROUND_SIZE:
        raise PartitionSizeError(
            f"ground set has {len(ground)} elements, at most {MAX_GROUND_SIZE} are enumerated"
        )
    seen: set = set()
    for element in ground:
        overlap = seen.intersection(element.labels)
        if overlap:
            raise ValueError(f"label {sorted(overlap)[0]} appears in two cluster elements")
        seen.update(element.labels)


def restricted_growth_strings(n: int) -> Iterator[Tuple[int, ...]]:
    """All restricted growth strings of length n in lexicographic order."""
    if n == 0:
        yield ()
        return
    codes = [0] * n
    maxima = [0] * n
    while True:
        yield tuple(codes)
        i = n - 1
        while i > 0 and codes[i] > maxima[i - 1]:
            i -= 1
        if i == 0:
            return
        codes[i] += 1
        maxima[i] = max(maxima[i - 1], codes[i])
        for j in range(i + 1, n):
            codes[j] = 0
            maxima[j] = maxima[i]


def iter_partitions(ground: Sequence[ElementLike]) -> Iterator[Partition]:
    elements = [as_element(item) for item in ground]
    _check_ground(elements)
    for codes in restricted_growth_strings(len(elements)):
        blocks: List[List[ClusterElement]] = [[] for _ in range(max(codes) + 1)]
        for element, code in zip(elements, codes):
            blocks[code].append(element)
        yield Partition(tuple(tuple(block) for block in blocks))


def enumerate_partitions(ground: Sequence[ElementLike]) -> List[Partition]:
    return list(iter_partitions(ground))


@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    if n > MAX_STIRLING_ARG:
        raise PartitionSizeError(f"stirling2 is capped at n={MAX_STIRLING_ARG}, got n={n}")
    if n < 0 or k < 0:
        return 0
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


@lru_cache(maxsize=None)
def bell_number(n: int) -> int:
    """Bell number from the Bell triangle, independent of the enumeration."""
    if n < 0:
        raise ValueError("n must be non-negative")
    row = [1]
    for _ in range(n):
        next_row = [row[-1]]
        for value in row:
            next_row.append(next_row[-1] + value)
        row = next_row
    return row[0]


def cumulant_coefficient_for_size(size: int) -> int:
    if size < 1:
        raise ValueError("a partition has at least one block")
    return (-1) ** (size - 1) * math.factorial(size - 1)


def cumulant_coefficient(partition: Partition) -> int:
    return cumulant_coefficient_for_size(len(partition))


def cumulant_coefficient_sum(n: int, k: int) -> int:
    """Σ of cumulant coefficients over the partitions of an n-set with k blocks."""
    if k < 1:
        return 0
    return cumulant_coefficient_for_size(k) * stirling2(n, k)


@lru_cache(maxsize=None)
def alternating_partition_sum(n: int) -> int:
    """Σ_P (-1)^|P| |P|! over the partitions of an n-set.

    The empty set has the single empty partition, giving 1.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    return sum((-1) ** k * math.factorial(k) * stirling2(n, k) for k in range(0, n + 1))


def alternating_partition_sum_enumerated(n: int) -> int:
    if n == 0:
        return 1
    ground = list(range(1, n + 1))
    return sum((-1) ** len(p) * math.factorial(len(p)) for p in iter_partitions(ground))


def falling_factorial(s: int, n: int) -> int:
    if n < 0 or n > s:
        return 0
    return math.factorial(s) // math.factorial(s - n)


def enumerate_injections(n: int, s: int) -> List[Tuple[int, ...]]:
    """Ordered tuples (j1,...,jn) of distinct labels from 1..s, lexicographic."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > s:
        return []
    return list(itertools.permutations(range(1, s + 1), n))


def cumulant_norm_bound(n: int) -> int:
    """Σ_k S(n+1,k)(k-1)!: the partition count weighting in the cumulant estimate."""
    return sum(stirling2(n + 1, k) * math.factorial(k - 1) for k in range(1, n + 2))


def cumulant_norm_ceiling(n: int) -> float:
    return math.factorial(n) * math.exp(n + 2)


def subsets(labels: Sequence[Label]) -> Iterator[Tuple[Label, ...]]:
    """All subsets in order of increasing size, each sorted."""
    ordered = tuple(sorted(labels))
    for size in range(len(ordered) + 1):
        yield from itertools.combinations(ordered, size)
