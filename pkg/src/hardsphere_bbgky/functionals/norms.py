import logging
import math
from typing import Union

import numpy as np

from .sampling import ChannelSet, SamplingSpec, overlaps, stream_rng
from .sequences import ObservableSeq, StateSeq
from ..dynamics.flow import act_on_observable, evolve
from ..dynamics.models import Configuration, PathologyError


logger = logging.getLogger(__name__)


NORM_KINDS = ("C_gamma", "L1_alpha")


def sample_sup(seq: Union[ObservableSeq, StateSeq], n: int, spec: SamplingSpec, n_samples: int, seed: int, stream: int = 0) -> float:
    """max |component n| over allowed draws of the sampling law."""
    if seq.component(n) is None:
        return 0.0
    if n == 0:
        empty = np.zeros((0, 3))
        return abs(seq.value(0, empty, empty))
    rng = stream_rng(seed, stream, n)
    best = 0.0
    for _ in range(n_samples):
        q, p = spec.draw(rng, n)
        if overlaps(q, spec.sigma):
            continue
        best = max(best, abs(seq.value(n, q, p)))
    return best


def norm_diagnostics(
    seq: Union[ObservableSeq, StateSeq],
    kind: str,
    parameter: float,
    spec: SamplingSpec,
    n_samples: int = 2000,
    seed: int = 0,
) -> float:
    """Sample-based surrogates of the sequence norms.

    C_gamma: max_n γ^n/n!·sup|b_n| with the sup over sampled points.
    L1_alpha: Σ_n α^n ∫|f_n| by Monte Carlo.
    """
    if kind not in NORM_KINDS:
        raise ValueError(f"norm kind must be one of {NORM_KINDS}, got {kind!r}")
    if kind == "C_gamma":
        best = 0.0
        for n in range(0, seq.n_max + 1):
            best = max(best, parameter ** n / math.factorial(n) * sample_sup(seq, n, spec, n_samples, seed, n))
        return best

    if not isinstance(seq, StateSeq):
        raise TypeError("the L1_alpha norm is defined for state sequences")
    channels = ChannelSet(seq.spec, "lebesgue")
    coefficients = {}
    for n in range(0, seq.n_max + 1):
        for index, term in enumerate(seq.terms(n)):
            key = (n, index)
            channels.add(key, n + term.n_free, _absolute(term.density))
            coefficients[key] = parameter ** n * abs(term.weight)
    if not coefficients:
        return 0.0
    estimate = channels.estimate(n_samples, seed).combine(coefficients)
    logger.debug(f"L1_alpha surrogate {estimate.value:.6g} ± {estimate.stderr:.2g}")
    return estimate.value


def _absolute(density):
    def integrand(q: np.ndarray, p: np.ndarray) -> float:
        return abs(float(density(q, p)))

    return integrand


def isometry_gap(b, t: float, spec: SamplingSpec, n: int, n_samples: int, seed: int) -> float:
    """|sup|S(t)b| - sup|b∘Φ_t|| over one sample set; zero for an isometric group action."""
    rng = stream_rng(seed, 11, n)
    evolved_sup = 0.0
    image_sup = 0.0
    for _ in range(n_samples):
        q, p = spec.draw(rng, n)
        if overlaps(q, spec.sigma):
            continue
        c = Configuration(q, p, spec.sigma)
        try:
            evolved_sup = max(evolved_sup, abs(act_on_observable(b, c, t)))
            image = evolve(c, t)
        except PathologyError:
            continue
        image_sup = max(image_sup, abs(float(b(image.positions, image.momenta))))
    return abs(evolved_sup - image_sup)
