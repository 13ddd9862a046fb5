import math
from dataclasses import replace

import numpy as np
import pytest

from hardsphere_bbgky.dynamics import Configuration
from hardsphere_bbgky.functionals import (
    ChannelSet,
    DegenerateNormalizationError,
    MCEstimate,
    MarginalComponent,
    ObservableSeq,
    SamplingSpec,
    StateSeq,
    annihilation,
    check_symmetry,
    creation,
    creation_exponential,
    evolved_state,
    isometry_gap,
    mc_integrate,
    mean_value,
    norm_diagnostics,
    normalization,
    pairing,
    reduce_observable,
    reduce_state,
    run_chunks,
    stream_rng,
)
from hardsphere_bbgky.functionals.library import (
    AdditiveFunction,
    CanonicalDensity,
    Constant,
    Maxwellian,
    OneParticleBump,
    PairFunction,
    ProductFunction,
    ZeroOnForbidden,
    bump,
    positive_bump,
)


ONE = OneParticleBump((5.0, 5.0, 5.0), 2.0, 2.0, (0.0, 0.0, 0.0), (1.0, 0.1, -0.1, 0.2))


def two_particles():
    return np.array([[4.5, 5.0, 5.0], [6.0, 5.5, 4.8]]), np.array([[0.3, -0.2, 0.1], [-0.4, 0.5, 0.0]])


def canonical(n_particles, n_max, spec):
    return StateSeq.canonical(CanonicalDensity(positive_bump(), spec.sigma), n_particles, n_max, spec)


def test_bump_profile():
    assert bump(0.0, 2.0) == pytest.approx(1.0)
    assert bump(2.0, 2.0) == 0.0
    assert bump(3.0, 2.0) == 0.0
    assert 0.0 < bump(1.0, 2.0) < 1.0


def test_library_functions_are_symmetric(spec):
    for func, n in ((AdditiveFunction(ONE), 3), (ProductFunction(ONE), 3), (PairFunction(), 3)):
        assert check_symmetry(func, n, spec, seed=5) <= 1e-12


def test_maxwellian_matches_momentum_law(spec, rng):
    maxwellian = Maxwellian(spec.beta)
    for n in (1, 3):
        q, p = spec.draw(rng, n)
        assert maxwellian(q, p) == pytest.approx(math.exp(spec.momentum_log_density(p)), rel=1e-12)


def test_zero_on_forbidden():
    wrapped = ZeroOnForbidden(Constant(2.0))
    assert wrapped(np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]), np.zeros((2, 3))) == 0.0
    assert wrapped(np.array([[0.0, 0.0, 0.0], [1.5, 0.0, 0.0]]), np.zeros((2, 3))) == 2.0


def test_bump_integral_matches_monte_carlo(spec):
    estimate = mc_integrate(ONE, 1, spec, 20000, seed=3, measure="lebesgue")
    assert abs(estimate.value - ONE.integral()) <= 4.0 * estimate.stderr


def test_constant_under_the_law_is_exact(spec):
    estimate = mc_integrate(Constant(1.0), 2, spec, 100, seed=1)
    assert estimate.value == pytest.approx(1.0)
    assert estimate.stderr == pytest.approx(0.0, abs=1e-12)


def test_law_counts_overlapping_draws(spec):
    estimate = mc_integrate(Constant(1.0), 2, spec, 400, seed=2)
    assert estimate.value == pytest.approx(1.0)
    assert estimate.n_rejected > 0


def test_crowded_law_hits_the_rejection_limit():
    crowded = SamplingSpec(box_length=1.0)
    with pytest.raises(RuntimeError, match="rejected samples"):
        mc_integrate(Constant(1.0), 3, crowded, 50, seed=4)
    assert mc_integrate(Constant(1.0), 3, replace(crowded, reject_overlaps=False), 50, seed=4).n_rejected == 0


def test_streams_are_reproducible_and_worker_independent(spec, monkeypatch):
    def sample(rng):
        return rng.standard_normal(2)

    first, _ = run_chunks(sample, 500, 7, (1, 2), chunk_size=128)
    monkeypatch.setenv("BBGKY_THREADS", "3")
    second, _ = run_chunks(sample, 500, 7, (1, 2), chunk_size=128)
    np.testing.assert_array_equal(first, second)
    other, _ = run_chunks(sample, 500, 7, (1, 3), chunk_size=128)
    assert not np.array_equal(first, other)
    assert stream_rng(7, 1).random() == stream_rng(7, 1).random()


def test_estimates_combine():
    total = MCEstimate(1.0, 0.3, 10, 0) + MCEstimate(2.0, 0.4, 10, 0)
    assert total.value == 3.0
    assert total.stderr == pytest.approx(0.5)
    assert total.scaled(-2.0).stderr == pytest.approx(1.0)
    assert MCEstimate(1.0, 0.1, 10, 0).agrees_with(MCEstimate(1.2, 0.1, 10, 0))


def test_common_random_numbers_cancel(spec):
    channels = ChannelSet(spec, "lebesgue")
    channels.add("a", 1, ONE).add("b", 1, ONE)
    result = channels.estimate(300, seed=2)
    difference = result.combine({"a": 1.0, "b": -1.0})
    assert difference.value == 0.0
    assert difference.stderr == pytest.approx(0.0, abs=1e-12)
    assert result.ratio({"a": 1.0}, {"b": 1.0}).value == pytest.approx(1.0)
    with pytest.raises(ValueError):
        channels.add("a", 1, ONE)


def test_creation_sums_over_removed_particles():
    b = ObservableSeq.single(1, ONE, 3)
    q, p = two_particles()
    created = creation(b)
    assert created.value(2, q, p) == pytest.approx(ONE(q[1:], p[1:]) + ONE(q[:1], p[:1]))
    assert created.component(1) is None


def test_reduce_identity_leaves_the_vacuum():
    reduced = reduce_observable(ObservableSeq.identity(3))
    q, p = two_particles()
    assert reduced.value(0, np.zeros((0, 3)), np.zeros((0, 3))) == 1.0
    assert reduced.value(1, q[:1], p[:1]) == pytest.approx(0.0)
    assert reduced.value(2, q, p) == pytest.approx(0.0)


def test_reduce_additive_keeps_only_one_particle_part():
    a = ObservableSeq([None] + [AdditiveFunction(ONE)] * 3)
    reduced = reduce_observable(a)
    q, p = two_particles()
    assert reduced.value(1, q[:1], p[:1]) == pytest.approx(ONE(q[:1], p[:1]))
    assert reduced.value(2, q, p) == pytest.approx(0.0, abs=1e-12)
    rebuilt = creation_exponential(reduced, 1)
    assert rebuilt.value(2, q, p) == pytest.approx(a.value(2, q, p))


def test_values_vanish_on_overlaps():
    b = ObservableSeq.single(2, PairFunction(), 2)
    assert b.value(2, np.array([[5.0, 5.0, 5.0], [5.5, 5.0, 5.0]]), np.zeros((2, 3))) == 0.0


def test_mean_value_of_particle_number(spec):
    d = canonical(2, 3, spec)
    number = ObservableSeq([Constant(0.0), Constant(1.0), Constant(2.0), Constant(3.0)])
    estimate = mean_value(number, d, 400, seed=4)
    assert estimate.value == pytest.approx(2.0, rel=1e-12)


def test_reduced_state_pairs_with_number_observable(spec):
    d = canonical(2, 2, spec)
    f = reduce_state(d, 2000, seed=9)
    assert isinstance(f.component(1), MarginalComponent)
    assert f.normalization is not None and f.normalization.value > 0.0
    estimate = pairing(ObservableSeq.number(2), f, 2000, seed=9)
    assert estimate.value == pytest.approx(2.0, rel=0.05)


def test_degenerate_normalization(spec):
    d = StateSeq.canonical(Constant(0.0), 2, 2, spec)
    with pytest.raises(DegenerateNormalizationError):
        reduce_state(d, 200, seed=1)


def test_annihilation_integrates_out_one_particle(spec):
    d = canonical(2, 2, spec)
    reduced = annihilation(d, 200, seed=1)
    assert reduced.terms(1)[0].n_free == 1
    assert reduced.component(2) is None


def test_evolved_state_transports_components(spec):
    d = canonical(2, 2, spec)
    q, p = two_particles()
    moved = evolved_state(d, 0.4)
    # The pair recedes backwards in time, so the backward flow is free streaming.
    earlier = Configuration(q, p).streamed(-0.4)
    assert moved.value(2, q, p) == pytest.approx(d.value(2, earlier.positions, earlier.momenta))


def test_normalization_of_vacuum(spec):
    assert normalization(StateSeq.vacuum(2, spec), 100, seed=1).value == 1.0


def test_norm_diagnostics(spec):
    number = ObservableSeq.number(3)
    assert norm_diagnostics(number, "C_gamma", 0.3, spec, 50) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        norm_diagnostics(number, "sup", 0.3, spec)
    with pytest.raises(TypeError):
        norm_diagnostics(number, "L1_alpha", 3.0, spec)
    d = canonical(2, 2, spec)
    assert norm_diagnostics(d, "L1_alpha", 3.0, spec, 500) > 0.0


def test_group_action_is_isometric(spec):
    assert isometry_gap(ProductFunction(ONE), 0.7, spec, 2, 100, seed=3) == pytest.approx(0.0)
