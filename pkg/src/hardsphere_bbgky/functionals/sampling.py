import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from ..dynamics.models import PathologyError


logger = logging.getLogger(__name__)


PhaseFunction = Callable[[np.ndarray, np.ndarray], float]

THREADS_ENV = "BBGKY_THREADS"
MAX_REJECTION_FRACTION = 0.5
WARN_REJECTION_FRACTION = 0.01
MEASURES = ("law", "lebesgue")
POSITION_LAWS = ("uniform", "normal")


class OverlapRejection(Exception):
    """A drawn configuration overlaps where the law excludes overlaps."""


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        logger.warning(f"Ignoring non-integer {THREADS_ENV}={os.environ.get(THREADS_ENV)!r}")
        return 1


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent counter-based generator for one (stream, dimension, chunk) key under a root seed."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


@dataclass(frozen=True)
class SamplingSpec:
    """Proposal law for particles: positions in a box (or a Gaussian blob), Gaussian momenta of variance 1/beta."""

    sigma: float = 1.0
    box_length: float = 10.0
    beta: float = 1.0
    position_law: str = "uniform"
    position_center: Optional[Tuple[float, float, float]] = None
    position_width: float = 1.0
    reject_overlaps: bool = True
    chunk_size: int = 2000

    def __post_init__(self):
        if self.position_law not in POSITION_LAWS:
            raise ValueError(f"position_law must be one of {POSITION_LAWS}, got {self.position_law!r}")
        if self.sigma <= 0 or self.box_length <= 0 or self.beta <= 0 or self.position_width <= 0:
            raise ValueError("sigma, box_length, beta and position_width must be positive")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")

    @property
    def center(self) -> np.ndarray:
        if self.position_center is None:
            return np.full(3, 0.5 * self.box_length)
        return np.asarray(self.position_center, dtype=float)

    @property
    def momentum_scale(self) -> float:
        return 1.0 / math.sqrt(self.beta)

    def draw_positions(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.position_law == "uniform":
            return rng.uniform(0.0, self.box_length, size=(n, 3))
        return self.center + self.position_width * rng.standard_normal((n, 3))

    def draw_momenta(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.momentum_scale * rng.standard_normal((n, 3))

    def draw(self, rng: np.random.Generator, n: int) -> Tuple[np.ndarray, np.ndarray]:
        return self.draw_positions(rng, n), self.draw_momenta(rng, n)

    def position_log_density(self, q: np.ndarray) -> float:
        n = len(q)
        if self.position_law == "uniform":
            return -3.0 * n * math.log(self.box_length)
        width2 = self.position_width ** 2
        return float(-np.sum((q - self.center) ** 2) / (2.0 * width2) - 1.5 * n * math.log(2.0 * math.pi * width2))

    def momentum_log_density(self, p: np.ndarray) -> float:
        n = len(p)
        return float(-0.5 * self.beta * np.sum(p ** 2) - 1.5 * n * math.log(2.0 * math.pi / self.beta))

    def log_density(self, q: np.ndarray, p: np.ndarray) -> float:
        return self.position_log_density(q) + self.momentum_log_density(p)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if self.position_center is not None:
            data["position_center"] = list(self.position_center)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SamplingSpec":
        data = dict(data)
        if data.get("position_center") is not None:
            data["position_center"] = tuple(float(x) for x in data["position_center"])
        return cls(**data)


def overlaps(q: np.ndarray, sigma: float) -> bool:
    if len(q) < 2:
        return False
    i, j = np.triu_indices(len(q), k=1)
    return bool(np.any(np.sum((q[i] - q[j]) ** 2, axis=1) < sigma * sigma))


@dataclass
class MCEstimate:
    value: float
    stderr: float
    n_samples: int
    seed: int
    n_rejected: int = 0

    @classmethod
    def exact(cls, value: float, seed: int = 0) -> "MCEstimate":
        return cls(float(value), 0.0, 0, seed)

    def __add__(self, other: "MCEstimate") -> "MCEstimate":
        """Sum of independent estimates."""
        return MCEstimate(
            self.value + other.value,
            math.hypot(self.stderr, other.stderr),
            max(self.n_samples, other.n_samples),
            self.seed,
            self.n_rejected + other.n_rejected,
        )

    def scaled(self, factor: float) -> "MCEstimate":
        return MCEstimate(self.value * factor, self.stderr * abs(factor), self.n_samples, self.seed, self.n_rejected)

    def agrees_with(self, other: "MCEstimate", k: float = 3.0) -> bool:
        """|difference| within k combined standard errors, treating the two as independent."""
        return abs(self.value - other.value) <= k * math.hypot(self.stderr, other.stderr)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


SampleFunction = Callable[[np.random.Generator], np.ndarray]


def _run_chunk(sample: SampleFunction, size: int, seed: int, key: Tuple[int, ...], chunk: int) -> Tuple[np.ndarray, int]:
    rng = stream_rng(seed, *key, chunk)
    rows: List[np.ndarray] = []
    rejected = 0
    limit = max(100, int(size / (1.0 - MAX_REJECTION_FRACTION)))
    while len(rows) < size:
        if rejected > limit:
            raise RuntimeError(f"more than {limit} rejected samples in chunk {chunk} of stream {key}")
        try:
            values = np.asarray(sample(rng), dtype=float)
        except (PathologyError, OverlapRejection) as error:
            logger.debug(f"Rejected sample: {error}")
            rejected += 1
            continue
        if not np.all(np.isfinite(values)):
            rejected += 1
            continue
        rows.append(values)
    return np.array(rows).reshape(size, -1), rejected


def run_chunks(sample: SampleFunction, n_samples: int, seed: int, key: Sequence[int], chunk_size: int = 2000) -> Tuple[np.ndarray, int]:
    """Draw n_samples accepted sample vectors, chunked over counter-keyed streams.

    Chunks run on a thread pool capped by BBGKY_THREADS and are merged in
    chunk order, so the result does not depend on the worker count.
    Samples raising PathologyError or OverlapRejection, or giving non-finite
    values, are redrawn and counted against the rejection limit.
    """
    if n_samples < 2:
        raise ValueError("Monte Carlo estimates need at least 2 samples")
    key = tuple(int(k) for k in key)
    sizes = [chunk_size] * (n_samples // chunk_size)
    if n_samples % chunk_size:
        sizes.append(n_samples % chunk_size)
    workers = min(worker_count(), len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda args: _run_chunk(sample, args[1], seed, key, args[0]), enumerate(sizes)))
    else:
        results = [_run_chunk(sample, size, seed, key, chunk) for chunk, size in enumerate(sizes)]
    values = np.vstack([rows for rows, _ in results])
    rejected = sum(count for _, count in results)
    if rejected > WARN_REJECTION_FRACTION * n_samples:
        logger.warning(f"Rejected {rejected} of {n_samples + rejected} samples ({100.0 * rejected / (n_samples + rejected):.1f}%)")
    return values, rejected


@dataclass
class Channel:
    key: Hashable
    dim: int
    integrand: PhaseFunction


@dataclass
class _DimensionGroup:
    keys: List[Hashable]
    means: np.ndarray
    covariance: np.ndarray
    n_samples: int
    n_rejected: int


@dataclass
class ChannelResult:
    """Channel means with the covariance of their sample means (channels of one dimension share samples)."""

    groups: Dict[int, _DimensionGroup] = field(default_factory=dict)
    seed: int = 0

    def _locate(self, key: Hashable) -> Tuple[int, int]:
        for dim, group in self.groups.items():
            if key in group.keys:
                return dim, group.keys.index(key)
        raise KeyError(key)

    def keys(self) -> List[Hashable]:
        return [key for group in self.groups.values() for key in group.keys]

    def _stats(self, coefficients: Dict[Hashable, float]) -> Tuple[float, Dict[int, np.ndarray]]:
        vectors: Dict[int, np.ndarray] = {}
        value = 0.0
        # Sequential sum in key order: identical channel lists give identical values.
        for key, coefficient in coefficients.items():
            dim, index = self._locate(key)
            vector = vectors.setdefault(dim, np.zeros(len(self.groups[dim].keys)))
            vector[index] += coefficient
            value += coefficient * float(self.groups[dim].means[index])
        return value, vectors

    def _covariance(self, left: Dict[int, np.ndarray], right: Dict[int, np.ndarray]) -> float:
        total = 0.0
        for dim in set(left) & set(right):
            total += float(left[dim] @ self.groups[dim].covariance @ right[dim])
        return total

    def _meta(self, vectors: Dict[int, np.ndarray]) -> Tuple[int, int]:
        dims = [dim for dim in vectors if dim > 0]
        n = max((self.groups[dim].n_samples for dim in dims), default=0)
        rejected = sum(self.groups[dim].n_rejected for dim in dims)
        return n, rejected

    def combine(self, coefficients: Dict[Hashable, float]) -> MCEstimate:
        value, vectors = self._stats(coefficients)
        variance = max(self._covariance(vectors, vectors), 0.0)
        n, rejected = self._meta(vectors)
        return MCEstimate(value, math.sqrt(variance), n, self.seed, rejected)

    def estimate(self, key: Hashable) -> MCEstimate:
        return self.combine({key: 1.0})

    def ratio(self, numerator: Dict[Hashable, float], denominator: Dict[Hashable, float]) -> MCEstimate:
        """Delta-method estimate of a ratio of two linear combinations."""
        top, top_vectors = self._stats(numerator)
        bottom, bottom_vectors = self._stats(denominator)
        if bottom == 0.0:
            raise ZeroDivisionError("ratio with a zero denominator estimate")
        r = top / bottom
        variance = (
            self._covariance(top_vectors, top_vectors)
            - 2.0 * r * self._covariance(top_vectors, bottom_vectors)
            + r * r * self._covariance(bottom_vectors, bottom_vectors)
        ) / (bottom * bottom)
        n, rejected = self._meta({**top_vectors, **bottom_vectors})
        return MCEstimate(r, math.sqrt(max(variance, 0.0)), n, self.seed, rejected)


class ChannelSet:
    """Integrals of several phase functions, estimated on common random numbers per dimension.

    measure="lebesgue" estimates ∫g dx by importance sampling with the
    SamplingSpec proposal; overlapping draws contribute zero. measure="law"
    estimates the expectation of g under the SamplingSpec law; with
    reject_overlaps set, overlapping draws are redrawn and counted as rejected.
    With mask_overlaps off the lebesgue integrands see overlapping draws and
    must handle them.
    """

    def __init__(self, spec: SamplingSpec, measure: str = "lebesgue", mask_overlaps: bool = True):
        if measure not in MEASURES:
            raise ValueError(f"measure must be one of {MEASURES}, got {measure!r}")
        self.spec = spec
        self.measure = measure
        self.mask_overlaps = mask_overlaps
        self.channels: List[Channel] = []

    def add(self, key: Hashable, dim: int, integrand: PhaseFunction) -> "ChannelSet":
        if any(channel.key == key for channel in self.channels):
            raise ValueError(f"duplicate channel {key!r}")
        if dim < 0:
            raise ValueError("channel dimension must be non-negative")
        self.channels.append(Channel(key, dim, integrand))
        return self

    def __len__(self) -> int:
        return len(self.channels)

    def _sampler(self, channels: List[Channel], dim: int) -> SampleFunction:
        spec = self.spec

        def sample(rng: np.random.Generator) -> np.ndarray:
            q, p = spec.draw(rng, dim)
            if self.measure == "law":
                if spec.reject_overlaps and overlaps(q, spec.sigma):
                    raise OverlapRejection(f"overlapping {dim}-particle draw")
                weight = 1.0
            else:
                if self.mask_overlaps and overlaps(q, spec.sigma):
                    return np.zeros(len(channels))
                weight = math.exp(-spec.log_density(q, p))
            return np.array([float(channel.integrand(q, p)) * weight for channel in channels])

        return sample

    def estimate(self, n_samples: int, seed: int, stream: int = 0) -> ChannelResult:
        result = ChannelResult(seed=seed)
        dims = sorted({channel.dim for channel in self.channels})
        for dim in dims:
            channels = [channel for channel in self.channels if channel.dim == dim]
            keys = [channel.key for channel in channels]
            if dim == 0:
                empty = np.zeros((0, 3))
                means = np.array([float(channel.integrand(empty, empty)) for channel in channels])
                result.groups[0] = _DimensionGroup(keys, means, np.zeros((len(keys), len(keys))), 0, 0)
                continue
            values, rejected = run_chunks(self._sampler(channels, dim), n_samples, seed, (stream, dim), self.spec.chunk_size)
            means = values.mean(axis=0)
            covariance = np.atleast_2d(np.cov(values, rowvar=False, ddof=1)) / n_samples
            result.groups[dim] = _DimensionGroup(keys, means, covariance, n_samples, rejected)
            logger.debug(f"dim {dim}: {len(keys)} channels over {n_samples} samples")
        return result


def mc_integrate(
    g: PhaseFunction,
    k: int,
    spec: SamplingSpec,
    n_samples: int,
    seed: int,
    measure: str = "law",
    stream: int = 0,
) -> MCEstimate:
    """Estimate of a k-particle integral (expectation under the sampling law by default)."""
    channels = ChannelSet(spec, measure).add("g", k, g)
    estimate = channels.estimate(n_samples, seed, stream).estimate("g")
    if k == 0:
        estimate.n_samples = n_samples
    return estimate
