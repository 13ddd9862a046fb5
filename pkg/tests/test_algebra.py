from fractions import Fraction

import pytest

from hardsphere_bbgky.algebra import (
    IntegralityError,
    OperatorSequence,
    OperatorSymbol,
    collapsed_second_order,
    dual_cumulant,
    exp_star,
    ln_star,
    reduced_cumulant,
    reduced_cumulant_subsets,
    second_order_reduction,
    star_product,
    state_cumulant,
    verify_algebra,
    verify_cluster_inversion,
)
from hardsphere_bbgky.algebra.cumulants import expand_cumulant_symbols
from hardsphere_bbgky.algebra.symbols import group_symbol
from hardsphere_bbgky.algebra.verification import (
    verify_combinatorial_identities,
    verify_exp_ln_roundtrip,
    verify_reduced_cumulants,
    verify_second_order,
)
from hardsphere_bbgky.combinatorics import bell_number


def S(*labels, starred=False):
    return group_symbol(labels, starred)


def test_formal_sum_arithmetic_is_exact():
    a = S(1) + S(2)
    assert (a - S(2)) == S(1)
    product = a * S(3) + S(1) * S(3)
    assert product.coefficient((OperatorSymbol.group([3]), OperatorSymbol.group([1]))) == 2
    with pytest.raises(ValueError):
        a * a
    assert (S(1) - S(1)).is_zero()
    assert S(1).scale(Fraction(1, 2)).is_integral() is False


def test_non_integer_coefficient_raises():
    with pytest.raises(IntegralityError):
        S(1, 2).scale(Fraction(1, 3)).assert_integral("test")


def test_second_dual_cumulant():
    assert dual_cumulant(2, 1, (2,)) == S(1, 2) - S(1) * S(2)


def test_third_state_cumulant_term_count():
    cumulant = state_cumulant(1, 2)
    assert len(cumulant) == bell_number(3)
    assert cumulant.coefficient((OperatorSymbol.group([1], True), OperatorSymbol.group([2], True), OperatorSymbol.group([3], True))) == 2


def test_dual_cumulant_removing_every_label_is_zero():
    assert dual_cumulant(2, 2, (1, 2)).is_zero()


def test_dual_cumulant_rejects_bad_labels():
    with pytest.raises(ValueError):
        dual_cumulant(3, 1, (4,))
    with pytest.raises(ValueError):
        dual_cumulant(3, 2, (2,))


def test_star_product_of_units():
    unit = OperatorSequence.unit(3)
    groups = OperatorSequence.group(3)
    assert star_product(unit, groups) == groups
    assert star_product(groups, unit) == groups


def test_exp_ln_round_trip_on_groups():
    groups = OperatorSequence.group(4)
    cumulants = ln_star(groups)
    assert cumulants.component(1) == S(1)
    assert cumulants.component(2) == S(1, 2) - S(1) * S(2)
    assert exp_star(cumulants) == OperatorSequence.unit(4) + groups


def test_exp_star_rejects_unit_component():
    with pytest.raises(ValueError):
        exp_star(OperatorSequence.unit(2))


def test_reduced_cumulant_binomial_form():
    assert reduced_cumulant(2, 1, "dual") == S(1, 2) - S(1)
    state = reduced_cumulant(1, 2, "state")
    assert state == S(1, 2, 3, starred=True) - S(1, 2, starred=True).scale(2) + S(1, starred=True)


def test_reduced_cumulant_order_limit():
    with pytest.raises(ValueError):
        reduced_cumulant(2, 2, "dual")
    with pytest.raises(ValueError):
        reduced_cumulant(2, 1, "sideways")


def test_cumulant_regroups_to_subsets_on_fixed_labels():
    rest, tail = (1,), (2, 3)
    assert dual_cumulant(3, 2, tail).acting_on(rest) == reduced_cumulant_subsets(rest, tail)


def test_second_order_reduction_expands_to_cumulant():
    removed = (2, 3)
    reduction = second_order_reduction(3, 2, removed)
    assert expand_cumulant_symbols(reduction) == dual_cumulant(3, 2, removed)
    assert reduction.acting_on((1,)) == collapsed_second_order(3, 2, removed)


def test_second_order_reduction_needs_two_removed_labels():
    with pytest.raises(ValueError):
        second_order_reduction(3, 1)


def test_identity_suites_pass():
    for report in (
        verify_combinatorial_identities(),
        verify_cluster_inversion(4),
        verify_exp_ln_roundtrip(4),
        verify_reduced_cumulants(4),
        verify_second_order(4),
    ):
        assert report.passed, [c.to_dict() for c in report.failures()]


def test_perturbed_coefficient_is_reported():
    report = verify_algebra(3, perturbation=1)
    assert not report.passed
    assert all(check.identity.startswith("cluster expansion") for check in report.failures())
    assert report.to_dict()["passed"] is False


@pytest.mark.slow
def test_full_symbolic_sweep():
    assert verify_algebra(6).passed


def test_symbolic_order_is_capped():
    with pytest.raises(ValueError):
        verify_cluster_inversion(7)
