import math

import pytest

from hardsphere_bbgky.combinatorics import (
    ClusterElement,
    PartitionSizeError,
    alternating_partition_sum,
    bell_number,
    cumulant_coefficient,
    cumulant_norm_bound,
    cumulant_norm_ceiling,
    declusterize,
    enumerate_injections,
    enumerate_partitions,
    stirling2,
)
from hardsphere_bbgky.combinatorics.partitions import (
    alternating_partition_sum_enumerated,
    cumulant_coefficient_sum,
    falling_factorial,
)


BELL = [1, 1, 2, 5, 15, 52, 203, 877, 4140]


@pytest.mark.parametrize("n", range(1, 9))
def test_partition_count_matches_bell_numbers(n):
    partitions = enumerate_partitions(list(range(1, n + 1)))
    assert len(partitions) == BELL[n] == bell_number(n)


def test_partitions_are_distinct_and_cover_the_ground_set():
    ground = [1, 2, 3, 4]
    seen = set()
    for partition in enumerate_partitions(ground):
        labels = sorted(label for block in partition.block_labels() for label in block)
        assert labels == ground
        key = frozenset(frozenset(block) for block in partition.block_labels())
        assert key not in seen
        seen.add(key)


def test_first_partition_is_single_block():
    first = enumerate_partitions([1, 2, 3])[0]
    assert len(first) == 1
    assert first.block_labels() == [frozenset({1, 2, 3})]


def test_wrapped_cluster_counts_as_one_element():
    ground = [ClusterElement.label(1), ClusterElement.cluster([2, 3])]
    partitions = enumerate_partitions(ground)
    assert len(partitions) == 2
    assert {len(p) for p in partitions} == {1, 2}
    for partition in partitions:
        assert declusterize(e for block in partition.blocks for e in block) == frozenset({1, 2, 3})


def test_singleton_cluster_is_a_bare_label():
    assert ClusterElement.cluster([4]) == ClusterElement.label(4)
    assert str(ClusterElement.cluster([3, 2])) == "{2,3}"


def test_ground_set_limits():
    with pytest.raises(PartitionSizeError):
        enumerate_partitions([])
    with pytest.raises(PartitionSizeError):
        enumerate_partitions(list(range(1, 14)))
    with pytest.raises(ValueError):
        enumerate_partitions([ClusterElement.label(1), ClusterElement.cluster([1, 2])])


@pytest.mark.parametrize("n, k, expected", [(0, 0, 1), (4, 2, 7), (5, 2, 15), (5, 3, 25), (6, 3, 90), (3, 5, 0)])
def test_stirling_numbers(n, k, expected):
    assert stirling2(n, k) == expected


def test_stirling_numbers_above_the_cap_raise():
    assert stirling2(30, 2) == 2 ** 29 - 1
    with pytest.raises(PartitionSizeError):
        stirling2(31, 2)
    assert stirling2(-1, 0) == 0


@pytest.mark.parametrize("n", range(0, 9))
def test_stirling_rows_sum_to_bell(n):
    assert sum(stirling2(n, k) for k in range(n + 1)) == bell_number(n)


def test_cumulant_coefficient_signs():
    by_size = {}
    for partition in enumerate_partitions([1, 2, 3]):
        by_size[len(partition)] = cumulant_coefficient(partition)
    assert by_size == {1: 1, 2: -1, 3: 2}


@pytest.mark.parametrize("n", range(1, 8))
def test_cumulant_coefficients_cancel_for_n_at_least_two(n):
    total = sum(cumulant_coefficient_sum(n, k) for k in range(1, n + 1))
    assert total == (1 if n == 1 else 0)


@pytest.mark.parametrize("n", range(0, 9))
def test_alternating_partition_sum(n):
    assert alternating_partition_sum(n) == (-1) ** n
    assert alternating_partition_sum_enumerated(n) == alternating_partition_sum(n)


def test_injections_are_ordered_and_counted():
    injections = enumerate_injections(2, 3)
    assert injections[0] == (1, 2)
    assert len(injections) == falling_factorial(3, 2) == 6
    assert enumerate_injections(0, 3) == [()]
    assert enumerate_injections(4, 3) == []


def test_norm_bound_below_ceiling():
    for n in range(0, 8):
        assert cumulant_norm_bound(n) == sum(stirling2(n + 1, k) * math.factorial(k - 1) for k in range(1, n + 2))
        assert cumulant_norm_bound(n) <= cumulant_norm_ceiling(n)
