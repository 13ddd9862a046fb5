import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional, Tuple, Union

import numpy as np

from .library import Constant
from .sampling import ChannelSet, MCEstimate, PhaseFunction, SamplingSpec, overlaps, stream_rng
from ..dynamics.flow import act_on_state
from ..dynamics.models import Configuration


logger = logging.getLogger(__name__)


class DegenerateNormalizationError(Exception):
    pass


def _forbidden(q: np.ndarray, sigma: float) -> bool:
    return overlaps(q, sigma * (1.0 - 1e-10))


@dataclass(frozen=True)
class Transported:
    """(S*(t)f)(x) = f(Φ_{-t} x); zero on overlapping configurations."""

    density: PhaseFunction
    t: float
    sigma: float = 1.0

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        if len(q) == 0 or self.t == 0.0:
            return float(self.density(q, p))
        return act_on_state(self.density, Configuration(q, p, self.sigma), self.t)


@dataclass(frozen=True)
class MarginalTerm:
    """weight·∫ density(x, y) dy over n_free extra particles y."""

    density: PhaseFunction
    n_free: int = 0
    weight: float = 1.0

    def transported(self, t: float, sigma: float) -> "MarginalTerm":
        return MarginalTerm(Transported(self.density, t, sigma), self.n_free, self.weight)


@dataclass
class MarginalComponent:
    """A state component given as a sum of weighted integrals of higher-dimensional densities.

    Evaluated at a point it runs a fixed-seed inner Monte Carlo integral;
    integrals over its arguments are flattened into one joint sample space
    by the callers instead.
    """

    terms: List[MarginalTerm]
    spec: SamplingSpec
    n_samples: int = 2000
    seed: int = 0

    def estimate_at(self, q: np.ndarray, p: np.ndarray) -> MCEstimate:
        q = np.asarray(q, dtype=float).reshape(-1, 3)
        p = np.asarray(p, dtype=float).reshape(-1, 3)
        channels = ChannelSet(self.spec, "lebesgue")
        coefficients: Dict[Hashable, float] = {}
        for index, term in enumerate(self.terms):
            channels.add(index, term.n_free, _joined(term.density, q, p))
            coefficients[index] = term.weight
        return channels.estimate(self.n_samples, self.seed).combine(coefficients)

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        return self.estimate_at(q, p).value

    def transported(self, t: float) -> "MarginalComponent":
        terms = [term.transported(t, self.spec.sigma) for term in self.terms]
        return MarginalComponent(terms, self.spec, self.n_samples, self.seed)


def _joined(density: PhaseFunction, q: np.ndarray, p: np.ndarray) -> PhaseFunction:
    """y ↦ density(x ⊕ y) at a fixed point x."""

    def integrand(qy: np.ndarray, py: np.ndarray) -> float:
        return float(density(np.vstack([q, qy]), np.vstack([p, py])))

    return integrand


StateComponent = Union[PhaseFunction, MarginalComponent]


@dataclass
class ObservableSeq:
    """b_0, ..., b_{N_max}; None stands for a zero component. Values vanish on overlapping configurations."""

    components: List[Optional[PhaseFunction]]
    sigma: float = 1.0

    @property
    def n_max(self) -> int:
        return len(self.components) - 1

    def component(self, n: int) -> Optional[PhaseFunction]:
        if 0 <= n < len(self.components):
            return self.components[n]
        return None

    def value(self, n: int, q: np.ndarray, p: np.ndarray) -> float:
        b = self.component(n)
        if b is None:
            return 0.0
        q = np.asarray(q, dtype=float).reshape(-1, 3)
        if _forbidden(q, self.sigma):
            return 0.0
        return float(b(q, np.asarray(p, dtype=float).reshape(-1, 3)))

    @classmethod
    def zero(cls, n_max: int, sigma: float = 1.0) -> "ObservableSeq":
        return cls([None] * (n_max + 1), sigma)

    @classmethod
    def identity(cls, n_max: int, sigma: float = 1.0) -> "ObservableSeq":
        """I = (1, 1, ..., 1)."""
        return cls([Constant(1.0) for _ in range(n_max + 1)], sigma)

    @classmethod
    def number(cls, n_max: int, sigma: float = 1.0) -> "ObservableSeq":
        """The reduced number observable (0, 1, 0, ..., 0)."""
        return cls.single(1, Constant(1.0), n_max, sigma)

    @classmethod
    def single(cls, k: int, b: PhaseFunction, n_max: int, sigma: float = 1.0) -> "ObservableSeq":
        components: List[Optional[PhaseFunction]] = [None] * (n_max + 1)
        components[k] = b
        return cls(components, sigma)


@dataclass
class StateSeq:
    """f_0, ..., f_{N_max} integrated against the Lebesgue measure under a SamplingSpec proposal."""

    components: List[Optional[StateComponent]]
    spec: SamplingSpec = field(default_factory=SamplingSpec)
    normalization: Optional[MCEstimate] = None

    @property
    def n_max(self) -> int:
        return len(self.components) - 1

    def component(self, n: int) -> Optional[StateComponent]:
        if 0 <= n < len(self.components):
            return self.components[n]
        return None

    def terms(self, n: int) -> List[MarginalTerm]:
        component = self.component(n)
        if component is None:
            return []
        if isinstance(component, MarginalComponent):
            return list(component.terms)
        return [MarginalTerm(component, 0, 1.0)]

    def value(self, n: int, q: np.ndarray, p: np.ndarray) -> float:
        f = self.component(n)
        if f is None:
            return 0.0
        q = np.asarray(q, dtype=float).reshape(-1, 3)
        if _forbidden(q, self.spec.sigma):
            return 0.0
        return float(f(q, np.asarray(p, dtype=float).reshape(-1, 3)))

    @classmethod
    def vacuum(cls, n_max: int, spec: Optional[SamplingSpec] = None) -> "StateSeq":
        components: List[Optional[StateComponent]] = [None] * (n_max + 1)
        components[0] = Constant(1.0)
        return cls(components, spec or SamplingSpec())

    @classmethod
    def canonical(cls, density: PhaseFunction, n_particles: int, n_max: int, spec: Optional[SamplingSpec] = None) -> "StateSeq":
        """Only D_N is non-zero."""
        components: List[Optional[StateComponent]] = [None] * (n_max + 1)
        components[n_particles] = density
        return cls(components, spec or SamplingSpec())


@dataclass(frozen=True)
class RemovalSum:
    """(𝔞⁺b)_s(x_1..x_s) = Σ_j b_{s-1}(x without x_j)."""

    inner: PhaseFunction

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        n = len(q)
        total = 0.0
        for j in range(n):
            keep = [i for i in range(n) if i != j]
            total += float(self.inner(q[keep], p[keep]))
        return total


@dataclass(frozen=True)
class SubsetSum:
    """(e^{±𝔞⁺}b)_s(x) = Σ_{Z ⊆ (1..s)} (±1)^{s-|Z|} b_{|Z|}(x_Z)."""

    components: Tuple[Optional[PhaseFunction], ...]
    sign: int = 1
    sigma: float = 1.0

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        n = len(q)
        total = 0.0
        for size in range(0, n + 1):
            b = self.components[size] if size < len(self.components) else None
            if b is None:
                continue
            factor = self.sign ** (n - size)
            for chosen in itertools.combinations(range(n), size):
                rows = list(chosen)
                if _forbidden(q[rows], self.sigma):
                    continue
                total += factor * float(b(q[rows], p[rows]))
        return total


def creation(b: ObservableSeq) -> ObservableSeq:
    if b.n_max < 1:
        raise ValueError("creation needs N_max >= 1")
    components: List[Optional[PhaseFunction]] = [None]
    for s in range(1, b.n_max + 1):
        inner = b.component(s - 1)
        components.append(None if inner is None else RemovalSum(inner))
    return ObservableSeq(components, b.sigma)


def creation_exponential(b: ObservableSeq, sign: int = 1) -> ObservableSeq:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    frozen = tuple(b.components)
    components: List[Optional[PhaseFunction]] = []
    for s in range(0, b.n_max + 1):
        if all(frozen[size] is None for size in range(0, s + 1)):
            components.append(None)
        else:
            components.append(SubsetSum(frozen, sign, b.sigma))
    return ObservableSeq(components, b.sigma)


def reduce_observable(a: ObservableSeq) -> ObservableSeq:
    """B = e^{-𝔞⁺}A: B_s = Σ_n (-1)^n/n! Σ_{j_1≠..≠j_n} A_{s-n}(x without x_j)."""
    return creation_exponential(a, -1)


def annihilation(f: StateSeq, n_samples: int = 2000, seed: int = 0) -> StateSeq:
    """(𝔞f)_n(x_1..x_n) = ∫ f_{n+1}(x_1..x_{n+1}) dx_{n+1}."""
    components: List[Optional[StateComponent]] = []
    for n in range(0, f.n_max + 1):
        terms = [MarginalTerm(term.density, term.n_free + 1, term.weight) for term in f.terms(n + 1)]
        components.append(MarginalComponent(terms, f.spec, n_samples, seed) if terms else None)
    return StateSeq(components, f.spec, f.normalization)


def add_pairing_channels(channels: ChannelSet, b: ObservableSeq, f: StateSeq, prefix: Hashable, t: float = 0.0) -> Dict[Hashable, float]:
    """Channels of (b, f) = Σ_n (1/n!) ∫ b_n f_n, with f_n optionally transported by S*(t).

    Returns the coefficients that combine the channels into the pairing.
    """
    coefficients: Dict[Hashable, float] = {}
    sigma = f.spec.sigma
    for n in range(0, min(b.n_max, f.n_max) + 1):
        if b.component(n) is None:
            continue
        for index, term in enumerate(f.terms(n)):
            density = term.density if t == 0.0 else Transported(term.density, t, sigma)
            key = (prefix, n, index)
            channels.add(key, n + term.n_free, _paired(b, n, density))
            coefficients[key] = term.weight / math.factorial(n)
    return coefficients


def _paired(b: ObservableSeq, n: int, density: PhaseFunction) -> PhaseFunction:
    def integrand(q: np.ndarray, p: np.ndarray) -> float:
        value = b.value(n, q[:n], p[:n])
        if value == 0.0:
            return 0.0
        return value * float(density(q, p))

    return integrand


def pairing(b: ObservableSeq, f: StateSeq, n_samples: int, seed: int, stream: int = 0) -> MCEstimate:
    channels = ChannelSet(f.spec, "lebesgue")
    coefficients = add_pairing_channels(channels, b, f, "pair")
    if not coefficients:
        return MCEstimate(0.0, 0.0, n_samples, seed)
    return channels.estimate(n_samples, seed, stream).combine(coefficients)


def _check_normalization(estimate: MCEstimate):
    if abs(estimate.value) <= 3.0 * estimate.stderr or estimate.value == 0.0:
        raise DegenerateNormalizationError(
            f"normalization {estimate.value:.4g} ± {estimate.stderr:.2g} is consistent with zero"
        )


def mean_value(a: ObservableSeq, d: StateSeq, n_samples: int, seed: int, stream: int = 0) -> MCEstimate:
    """⟨A⟩ = (A, D)/(I, D), numerator and denominator on common random numbers."""
    channels = ChannelSet(d.spec, "lebesgue")
    numerator = add_pairing_channels(channels, a, d, "A")
    denominator = add_pairing_channels(channels, ObservableSeq.identity(d.n_max, d.spec.sigma), d, "I")
    result = channels.estimate(n_samples, seed, stream)
    _check_normalization(result.combine(denominator))
    return result.ratio(numerator, denominator)


def normalization(d: StateSeq, n_samples: int, seed: int, stream: int = 0) -> MCEstimate:
    """(I, D) = D_0 + Σ_n (1/n!) ∫ D_n."""
    return pairing(ObservableSeq.identity(d.n_max, d.spec.sigma), d, n_samples, seed, stream)


def reduce_state(d: StateSeq, n_samples: int, seed: int, inner_samples: int = 2000) -> StateSeq:
    """F = (I, D)^{-1} e^{𝔞} D, component s a sum of marginals of D_{s+n} weighted by 1/(n!·(I, D))."""
    z = normalization(d, n_samples, seed)
    _check_normalization(z)
    components: List[Optional[StateComponent]] = [Constant(1.0)]
    for s in range(1, d.n_max + 1):
        terms: List[MarginalTerm] = []
        for n in range(0, d.n_max - s + 1):
            for term in d.terms(s + n):
                terms.append(MarginalTerm(term.density, term.n_free + n, term.weight / (math.factorial(n) * z.value)))
        components.append(MarginalComponent(terms, d.spec, inner_samples, seed) if terms else None)
    logger.debug(f"Reduced state with normalization {z.value:.6g} ± {z.stderr:.2g}")
    return StateSeq(components, d.spec, z)


def evolved_state(d: StateSeq, t: float) -> StateSeq:
    """S*(t)D component-wise; marginal components transport their joint densities."""
    components: List[Optional[StateComponent]] = []
    for component in d.components:
        if component is None:
            components.append(None)
        elif isinstance(component, MarginalComponent):
            components.append(component.transported(t))
        else:
            components.append(Transported(component, t, d.spec.sigma))
    return StateSeq(components, d.spec, d.normalization)


def check_symmetry(func: PhaseFunction, n: int, spec: SamplingSpec, seed: int, trials: int = 20, rtol: float = 1e-12) -> float:
    """Largest relative change of func under random relabelings of random allowed points."""
    rng = stream_rng(seed, 7, n)
    worst = 0.0
    for _ in range(trials):
        q, p = spec.draw(rng, n)
        while overlaps(q, spec.sigma):
            q, p = spec.draw(rng, n)
        base = float(func(q, p))
        order = rng.permutation(n)
        permuted = float(func(q[order], p[order]))
        scale = max(abs(base), abs(permuted), 1e-300)
        worst = max(worst, abs(base - permuted) / scale)
    if worst > rtol:
        logger.warning(f"Symmetry spot check: relative deviation {worst:.3g} for n={n}")
    return worst
