from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Sequence, Tuple

import numpy as np


CONTACT_TOLERANCE = 1e-10
EVENT_TOLERANCE = 1e-9
MAX_PARTICLES = 8
MAX_EVENTS_PER_EVOLVE = 10_000


class PathologyKind(Enum):
    TRIPLE_CONTACT = "triple-contact"
    SIMULTANEOUS_PAIRS = "simultaneous-pairs"
    COLLISION_CASCADE = "collision-cascade"


@dataclass(frozen=True)
class PathologyFlag:
    kind: PathologyKind
    time: float


class PathologyError(Exception):
    """Raised for phase points whose trajectory has no unambiguous continuation."""

    def __init__(self, flag: PathologyFlag):
        super().__init__(f"{flag.kind.value} at t={flag.time:.6g}")
        self.flag = flag


class ConfigurationError(ValueError):
    pass


class CollisionPreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class PhasePoint:
    q: Tuple[float, float, float]
    p: Tuple[float, float, float]

    def __post_init__(self):
        if len(self.q) != 3 or len(self.p) != 3:
            raise ValueError("phase points live in R^3 x R^3")
        if not all(np.isfinite(self.q)) or not all(np.isfinite(self.p)):
            raise ValueError(f"non-finite phase point {self.q}, {self.p}")


@dataclass(frozen=True)
class CollisionEvent:
    """Collision of configuration rows pair = (i, j), i < j, counted from 0."""

    time: float
    pair: Tuple[int, int]
    eta: Tuple[float, float, float]

    @property
    def labels(self) -> Tuple[int, int]:
        """The colliding pair as particle labels 1..n."""
        return self.pair[0] + 1, self.pair[1] + 1


@dataclass(frozen=True, eq=False)
class Configuration:
    """n hard spheres of diameter sigma; rows of positions/momenta are particles 0..n-1."""

    positions: np.ndarray
    momenta: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float).reshape(-1, 3)
        momenta = np.array(self.momenta, dtype=float).reshape(-1, 3)
        if positions.shape != momenta.shape:
            raise ConfigurationError(f"{len(positions)} positions but {len(momenta)} momenta")
        if self.sigma <= 0:
            raise ConfigurationError("sphere diameter must be positive")
        positions.setflags(write=False)
        momenta.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "momenta", momenta)

    @classmethod
    def from_points(cls, points: Sequence[PhasePoint], sigma: float = 1.0) -> "Configuration":
        return cls(
            np.array([point.q for point in points], dtype=float).reshape(-1, 3),
            np.array([point.p for point in points], dtype=float).reshape(-1, 3),
            sigma,
        )

    @classmethod
    def empty(cls, sigma: float = 1.0) -> "Configuration":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), sigma)

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def points(self) -> List[PhasePoint]:
        return [PhasePoint(tuple(q), tuple(p)) for q, p in zip(self.positions, self.momenta)]

    def pair_distances(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros(0)
        i, j = np.triu_indices(self.n, k=1)
        return np.linalg.norm(self.positions[i] - self.positions[j], axis=1)

    def min_pair_distance(self) -> float:
        distances = self.pair_distances()
        return float(distances.min()) if len(distances) else float("inf")

    def is_allowed(self) -> bool:
        return self.min_pair_distance() >= self.sigma * (1.0 - CONTACT_TOLERANCE)

    def subset(self, indices: Iterable[int]) -> "Configuration":
        indices = list(indices)
        return Configuration(self.positions[indices], self.momenta[indices], self.sigma)

    def merge(self, other: "Configuration") -> "Configuration":
        return Configuration(
            np.vstack([self.positions, other.positions]),
            np.vstack([self.momenta, other.momenta]),
            self.sigma,
        )

    def reversed(self) -> "Configuration":
        return Configuration(self.positions, -self.momenta, self.sigma)

    def streamed(self, t: float) -> "Configuration":
        return Configuration(self.positions + t * self.momenta, self.momenta, self.sigma)

    def kinetic_energy(self) -> float:
        return 0.5 * float(np.sum(self.momenta ** 2))

    def total_momentum(self) -> np.ndarray:
        return self.momenta.sum(axis=0)

    def allclose(self, other: "Configuration", atol: float = 1e-9) -> bool:
        return (
            self.n == other.n
            and np.allclose(self.positions, other.positions, rtol=0.0, atol=atol)
            and np.allclose(self.momenta, other.momenta, rtol=0.0, atol=atol)
        )

    def __repr__(self) -> str:
        return f"Configuration(n={self.n}, sigma={self.sigma})"
