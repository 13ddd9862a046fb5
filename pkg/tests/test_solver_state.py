import math

import numpy as np
import pytest

from hardsphere_bbgky.dynamics import Configuration
from hardsphere_bbgky.functionals import ChannelSet, ObservableSeq, SamplingSpec, StateSeq, reduce_state, stream_rng
from hardsphere_bbgky.functionals.library import (
    AdditiveFunction,
    CanonicalDensity,
    Constant,
    OneParticleBump,
    PairFunction,
    positive_bump,
    random_bump,
)
from hardsphere_bbgky.solver import (
    CollisionKernelSpec,
    StateSolutionRequest,
    TimeQuadrature,
    collision_operator_state,
    compare_state_routes,
    duality_check,
    iteration_series_state,
    liouville_oracle,
    reduced_cumulant_solution,
    state_solution_F,
)
from hardsphere_bbgky.solver.collision import contact_pair
from hardsphere_bbgky.solver.state import add_series_channels


BUMP = OneParticleBump((5.0, 5.0, 5.0), 2.0, 2.0, (0.0, 0.0, 0.0), (1.0, 0.2, -0.1, 0.3))


@pytest.fixture
def pair_state(spec):
    d = StateSeq.canonical(CanonicalDensity(positive_bump(), spec.sigma), 2, 2, spec)
    return d, reduce_state(d, 800, 3)


@pytest.fixture
def wide_pair_state():
    """Two-particle canonical state under a proposal wide enough to keep importance weights bounded."""
    wide = SamplingSpec(sigma=1.0, box_length=10.0, beta=0.5, position_law="normal", position_width=2.0)
    d = StateSeq.canonical(CanonicalDensity(positive_bump(), wide.sigma), 2, 2, wide)
    return d, reduce_state(d, 2000, 3)


def one_body_state(spec):
    """F⁰ with an explicit one-particle component and no pair component."""
    return StateSeq([Constant(1.0), BUMP, None], spec)


def test_sphere_rule_weights():
    nodes, weights = CollisionKernelSpec().sphere_rule()
    assert weights.sum() == pytest.approx(4.0 * math.pi)
    assert np.all(weights > 0.0)
    assert np.allclose(np.linalg.norm(nodes, axis=1), 1.0)


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        CollisionKernelSpec(gain_offset_sign=0)
    with pytest.raises(ValueError):
        CollisionKernelSpec(momentum_width=0.0)


def test_contact_pair_geometry(single):
    eta = np.array([1.0, 0.0, 0.0])
    p_new = np.array([-0.5, 0.0, 0.0])
    gain, loss, transfer = contact_pair(single, 0, p_new, eta)
    assert transfer == pytest.approx(1.2)
    assert np.allclose(gain.positions[-1], single.positions[0] - eta)
    assert np.allclose(loss.positions[-1], single.positions[0] + eta)
    assert np.allclose(loss.momenta[-1], p_new)
    energy_before = np.sum(single.momenta ** 2) + np.sum(p_new ** 2)
    assert np.sum(gain.momenta ** 2) == pytest.approx(energy_before)
    assert np.allclose(gain.momenta.sum(axis=0), loss.momenta.sum(axis=0))


def test_contact_pair_outgoing_direction(single):
    gain, loss, transfer = contact_pair(single, 0, np.array([3.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]))
    assert gain is None and loss is None
    assert transfer <= 0.0


def test_contact_pair_blocked_by_third_sphere():
    c = Configuration([[4.0, 5.0, 5.0], [5.5, 5.0, 5.0]], [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], 1.0)
    gain, loss, transfer = contact_pair(c, 0, np.array([-1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]))
    assert transfer == pytest.approx(1.0)
    assert gain is not None
    assert loss is None


def test_collision_term_of_constant_vanishes(single):
    estimate = collision_operator_state(Constant(2.0), 0, single, n_samples=50, seed=4)
    assert estimate.value == 0.0
    assert estimate.stderr == 0.0


def test_collision_operator_rejects_bad_input(head_on):
    with pytest.raises(ValueError):
        collision_operator_state(Constant(1.0), 2, head_on, n_samples=10)
    touching = Configuration([[4.0, 5.0, 5.0], [4.5, 5.0, 5.0]], [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], 1.0)
    with pytest.raises(ValueError):
        collision_operator_state(Constant(1.0), 0, touching, n_samples=10)


def test_time_quadrature_rules():
    quadrature = TimeQuadrature(nodes=4)
    x, w = quadrature.rule(2.0)
    assert np.sum(w * x ** 3) == pytest.approx(2.0 ** 4 / 4.0)
    weights = [weight for _, _, weight in quadrature.simplex_rule(1.5)]
    assert sum(weights) == pytest.approx(1.5 ** 2 / 2.0)
    for t1, t2, _ in quadrature.simplex_rule(1.5, refined=True):
        assert 0.0 < t2 < t1 < 1.5
    with pytest.raises(ValueError):
        TimeQuadrature(nodes=0)


def test_iteration_series_at_time_zero(spec, single):
    result = iteration_series_state(1, 0.0, one_body_state(spec), 2, single)
    assert result.total.value == pytest.approx(BUMP(single.positions, single.momenta))
    assert result.total.stderr == 0.0
    assert [order.value for order in result.orders[1:]] == [0.0, 0.0]
    assert result.refinement_ok


def test_iteration_series_order_zero_is_free_transport(spec, single):
    result = iteration_series_state(1, 0.7, one_body_state(spec), 0, single)
    streamed = single.positions - 0.7 * single.momenta
    assert result.total.value == pytest.approx(BUMP(streamed, single.momenta))
    assert len(result.orders) == 1


def test_iteration_series_without_pair_component(spec, single):
    result = iteration_series_state(1, 0.5, one_body_state(spec), 1, single, TimeQuadrature(nodes=2), n_samples=20, seed=8)
    assert result.orders[1].value == 0.0
    assert result.quadrature_tolerance == [0.0, 0.0]
    assert result.refinement_ok
    streamed = single.positions - 0.5 * single.momenta
    assert result.total.value == pytest.approx(BUMP(streamed, single.momenta))


def test_iteration_series_validation(spec, single, head_on):
    with pytest.raises(ValueError):
        iteration_series_state(1, 0.5, one_body_state(spec), 3, single)
    with pytest.raises(ValueError):
        iteration_series_state(1, 0.5, one_body_state(spec), 1, head_on)


def test_state_request_validation(pair_state, single, head_on):
    _, f0 = pair_state
    with pytest.raises(ValueError):
        StateSolutionRequest(1, 0.5, f0, 2, [single])
    with pytest.raises(ValueError):
        StateSolutionRequest(1, 0.5, f0, 1, [head_on])
    with pytest.raises(ValueError):
        StateSolutionRequest(0, 0.5, f0, 0, [])


def test_state_series_orders(pair_state, single):
    _, f0 = pair_state
    request = StateSolutionRequest(1, 0.4, f0, 1, [single], n_samples=300, seed=5)
    (result,) = state_solution_F(request)
    assert len(result.orders) == 2
    assert len(result.bounds) == 2
    assert result.total.value == pytest.approx(sum(order.value for order in result.orders), rel=1e-9, abs=1e-12)
    assert result.tail_estimate >= 0.0


def test_routes_agree_with_oracle_at_time_zero(pair_state, single):
    _, f0 = pair_state
    request = StateSolutionRequest(1, 0.0, f0, 1, [single], n_samples=300, seed=6)
    (routes,) = compare_state_routes(request)
    assert abs(routes.cumulant_minus_oracle.value) <= 3.0 * routes.cumulant_minus_oracle.stderr + 1e-9
    assert abs(routes.reduced_minus_cumulant.value) <= 3.0 * routes.reduced_minus_cumulant.stderr + 1e-9
    assert routes.orders[1].value == pytest.approx(0.0, abs=1e-9)


def test_routes_without_oracle(pair_state, single):
    _, f0 = pair_state
    request = StateSolutionRequest(1, 0.3, f0, 1, [single], n_samples=200, seed=7)
    (routes,) = compare_state_routes(request, with_oracle=False)
    assert routes.oracle is None
    assert routes.cumulant_minus_oracle is None
    assert len(routes.orders) == 2


def test_free_products_survive_an_overlapping_start(spec, single):
    density = CanonicalDensity(positive_bump(), 1.0)
    f0 = StateSeq([Constant(1.0), None, density], spec)
    channels = ChannelSet(spec, "lebesgue", mask_overlaps=False)
    add_series_channels(channels, f0, single, 0.6, 1)
    integrand = next(channel.integrand for channel in channels.channels if channel.key == ("cumulant", 1, 0))

    # The added particle starts inside the first one: S*(12) drops out, -S*(1)S*(2) streams both freely.
    q = single.positions + np.array([[0.5, 0.0, 0.0]])
    p = np.array([[-1.5, 0.0, 0.0]])
    streamed_q = np.vstack([single.positions - 0.6 * single.momenta, q - 0.6 * p])
    streamed_p = np.vstack([single.momenta, p])
    expected = -density(streamed_q, streamed_p)
    assert expected < 0.0
    assert integrand(q, p) == pytest.approx(expected)


def test_complete_series_matches_oracle_after_collisions(wide_pair_state, single):
    _, f0 = wide_pair_state
    request = StateSolutionRequest(1, 0.6, f0, 1, [single], n_samples=3000, seed=9)
    (routes,) = compare_state_routes(request)
    assert routes.orders[1].value != 0.0
    for gap in (routes.cumulant_minus_oracle, routes.reduced_minus_cumulant):
        assert gap.stderr > 0.0
        assert abs(gap.value) <= 4.0 * gap.stderr


def test_first_collision_order_matches_cumulant_order(wide_pair_state, single):
    _, f0 = wide_pair_state
    iteration = iteration_series_state(
        1, 0.6, f0, 1, single, TimeQuadrature(nodes=4, refine=False), CollisionKernelSpec(lebedev_order=5), n_samples=800, seed=5
    )
    request = StateSolutionRequest(1, 0.6, f0, 1, [single], n_samples=3000, seed=6)
    (routes,) = compare_state_routes(request, with_oracle=False)
    assert iteration.orders[1].value != 0.0
    assert iteration.orders[0].agrees_with(routes.orders[0], k=4.0)
    assert iteration.orders[1].agrees_with(routes.orders[1], k=4.0)


def test_duality_after_collisions_with_random_observable(wide_pair_state):
    d, f0 = wide_pair_state
    one = random_bump(stream_rng(11, 17, 0))
    b0 = ObservableSeq([None, AdditiveFunction(one), PairFunction(1.0)], 1.0)
    report = duality_check(b0, d, 0.5, n_samples=2000, seed=12, f0=f0)
    assert report.evolved_observable.value != report.evolved_state.value
    assert report.difference.stderr > 0.0
    assert abs(report.difference.value) <= 4.0 * report.difference.stderr


@pytest.mark.slow
def test_complete_series_matches_liouville_oracle(pair_state, single):
    _, f0 = pair_state
    request = StateSolutionRequest(1, 0.8, f0, 1, [single], n_samples=4000, seed=11)
    (routes,) = compare_state_routes(request)
    gap = routes.cumulant_minus_oracle
    assert abs(gap.value) <= 4.0 * gap.stderr
    assert abs(routes.reduced_minus_cumulant.value) <= 4.0 * routes.reduced_minus_cumulant.stderr + 1e-9


def test_liouville_oracle_per_point(pair_state, single):
    _, f0 = pair_state
    other = Configuration([[4.8, 5.3, 5.0]], [[0.1, 0.2, -0.3]], 1.0)
    estimates = liouville_oracle(f0, 0.5, [single, other], 200, 9)
    assert len(estimates) == 2
    assert all(math.isfinite(estimate.value) for estimate in estimates)


def test_reduced_cumulant_solution_sides(pair_state, single):
    _, f0 = pair_state
    request = StateSolutionRequest(1, 0.3, f0, 1, [single], n_samples=200, seed=10)
    estimates = reduced_cumulant_solution("state", request)
    assert len(estimates) == 1
    with pytest.raises(ValueError):
        reduced_cumulant_solution("both", request)


def test_state_duality_at_time_zero(pair_state):
    d, f0 = pair_state
    report = duality_check(ObservableSeq.number(2), d, 0.0, n_samples=300, seed=2, f0=f0)
    assert report.difference.value == 0.0
    assert report.passed
    assert report.to_dict()["passed"] is True


@pytest.mark.slow
def test_distinct_seeds_agree(wide_pair_state, single):
    _, f0 = wide_pair_state
    first, second = (
        state_solution_F(StateSolutionRequest(1, 0.6, f0, 1, [single], n_samples=3000, seed=seed))[0].total for seed in (101, 202)
    )
    assert first.value != second.value
    assert first.agrees_with(second, k=5.0)
