"""Hard-sphere collision term of the BBGKY hierarchy.

For particle i of an s-particle configuration and a fresh particle s+1,
the integrated interaction term reads

    σ² ∫ dp ∫_{⟨η, p_i - p⟩ > 0} dη ⟨η, p_i - p⟩ [f(gain) - f(loss)]

where the gain configuration puts the fresh particle at q_i - ση with
pre-collision momenta and the loss configuration puts it at q_i + ση with
the given momenta. Both are incoming configurations: backward in time the
pair separates at once.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import lebedev_rule
from scipy.spatial.transform import Rotation

from ..dynamics.models import Configuration
from ..functionals.sampling import MCEstimate, PhaseFunction, run_chunks


logger = logging.getLogger(__name__)


SPHERE_AREA = 4.0 * math.pi


@lru_cache(maxsize=16)
def _sphere_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = lebedev_rule(order)
    nodes = np.asarray(nodes, dtype=float).T
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0.0):
        raise ValueError(f"sphere rule of order {order} has non-positive weights")
    weights = weights * (SPHERE_AREA / weights.sum())
    return nodes, weights


@dataclass(frozen=True)
class CollisionKernelSpec:
    """Sphere quadrature over η and the Gaussian proposal for the fresh particle's momentum."""

    lebedev_order: int = 7
    gain_offset_sign: int = -1
    momentum_width: float = 1.0
    momentum_center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotate: bool = True

    def __post_init__(self):
        if self.gain_offset_sign not in (1, -1):
            raise ValueError("gain_offset_sign must be +1 or -1")
        if self.momentum_width <= 0:
            raise ValueError("momentum_width must be positive")
        _sphere_rule(self.lebedev_order)

    def sphere_rule(self) -> Tuple[np.ndarray, np.ndarray]:
        """(nodes (m, 3), weights (m,)) with weights summing to 4π."""
        return _sphere_rule(self.lebedev_order)

    @property
    def node_count(self) -> int:
        return len(self.sphere_rule()[1])

    def draw_momentum(self, rng: np.random.Generator) -> np.ndarray:
        return np.asarray(self.momentum_center) + self.momentum_width * rng.standard_normal(3)

    def momentum_density(self, p: np.ndarray) -> float:
        width2 = self.momentum_width ** 2
        d2 = float(np.sum((p - np.asarray(self.momentum_center)) ** 2))
        return math.exp(-0.5 * d2 / width2) / (2.0 * math.pi * width2) ** 1.5

    def directions(self, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes under a uniformly random rotation, which makes the rule unbiased."""
        nodes, weights = self.sphere_rule()
        if not self.rotate:
            return nodes, weights
        # A normalized Gaussian quaternion is uniform on the rotation group.
        rotation = Rotation.from_quat(rng.standard_normal(4))
        return rotation.apply(nodes), weights


def random_direction(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def _inside_other(c: Configuration, i: int, q_new: np.ndarray) -> bool:
    if c.n < 2:
        return False
    others = np.delete(c.positions, i, axis=0)
    return bool(np.any(np.sum((others - q_new) ** 2, axis=1) < (c.sigma * (1.0 - 1e-10)) ** 2))


def contact_pair(
    c: Configuration,
    i: int,
    p_new: np.ndarray,
    eta: np.ndarray,
    gain_offset_sign: int = -1,
) -> Tuple[Optional[Configuration], Optional[Configuration], float]:
    """Gain and loss (s+1)-particle configurations for one direction, and ⟨η, p_i - p_new⟩.

    A configuration is None when the fresh particle would sit inside a
    sphere other than i; both are None when the direction is outgoing.
    """
    transfer = float(np.dot(eta, c.momenta[i] - p_new))
    if transfer <= 0.0:
        return None, None, transfer
    sigma = c.sigma

    q_gain = c.positions[i] + gain_offset_sign * sigma * eta
    gain = None
    if not _inside_other(c, i, q_gain):
        momenta = np.vstack([c.momenta, p_new])
        momenta[i] = c.momenta[i] - transfer * eta
        momenta[-1] = p_new + transfer * eta
        gain = Configuration(np.vstack([c.positions, q_gain]), momenta, sigma)

    q_loss = c.positions[i] - gain_offset_sign * sigma * eta
    loss = None
    if not _inside_other(c, i, q_loss):
        loss = Configuration(np.vstack([c.positions, q_loss]), np.vstack([c.momenta, p_new]), sigma)
    return gain, loss, transfer


def collision_kernel(
    f: PhaseFunction,
    c: Configuration,
    i: int,
    p_new: np.ndarray,
    directions: np.ndarray,
    weights: np.ndarray,
    gain_offset_sign: int = -1,
) -> float:
    """σ² Σ_k w_k ⟨η_k, p_i - p_new⟩₊ [f(gain) - f(loss)] at one fresh momentum."""
    total = 0.0
    for eta, weight in zip(directions, weights):
        gain, loss, transfer = contact_pair(c, i, p_new, eta, gain_offset_sign)
        if transfer <= 0.0:
            continue
        value = 0.0
        if gain is not None:
            value += float(f(gain.positions, gain.momenta))
        if loss is not None:
            value -= float(f(loss.positions, loss.momenta))
        total += weight * transfer * value
    return c.sigma ** 2 * total


def collision_sample(
    f: PhaseFunction,
    c: Configuration,
    particles: Tuple[int, ...],
    spec: CollisionKernelSpec,
    rng: np.random.Generator,
) -> float:
    """One importance-weighted draw of Σ_{i in particles} ∫dx_{s+1} ℒ*_int(i, s+1) f."""
    p_new = spec.draw_momentum(rng)
    directions, weights = spec.directions(rng)
    kernel = sum(collision_kernel(f, c, i, p_new, directions, weights, spec.gain_offset_sign) for i in particles)
    return kernel / spec.momentum_density(p_new)


def collision_operator_state(
    f: PhaseFunction,
    i: int,
    c: Configuration,
    spec: Optional[CollisionKernelSpec] = None,
    n_samples: int = 2000,
    seed: int = 0,
    stream: int = 0,
) -> MCEstimate:
    """∫dx_{s+1} ℒ*_int(i, s+1) f_{s+1} at the s-particle configuration c (i is a 0-based row)."""
    spec = spec or CollisionKernelSpec()
    if not 0 <= i < c.n:
        raise ValueError(f"particle index {i} outside 0..{c.n - 1}")
    if not c.is_allowed():
        raise ValueError("collision terms need an allowed configuration")

    def sample(rng: np.random.Generator) -> np.ndarray:
        return np.array([collision_sample(f, c, (i,), spec, rng)])

    values, rejected = run_chunks(sample, n_samples, seed, (stream, 97, i))
    column = values[:, 0]
    stderr = float(np.std(column, ddof=1) / math.sqrt(n_samples))
    logger.debug(f"collision term i={i}: {column.mean():.6g} ± {stderr:.2g} over {spec.node_count} directions")
    return MCEstimate(float(column.mean()), stderr, n_samples, seed, rejected)


def collision_term(
    f: PhaseFunction,
    c: Configuration,
    spec: Optional[CollisionKernelSpec] = None,
    n_samples: int = 2000,
    seed: int = 0,
    stream: int = 0,
) -> MCEstimate:
    """Σ_i over all particles of c, on one sample set."""
    spec = spec or CollisionKernelSpec()
    particles = tuple(range(c.n))

    def sample(rng: np.random.Generator) -> np.ndarray:
        return np.array([collision_sample(f, c, particles, spec, rng)])

    values, rejected = run_chunks(sample, n_samples, seed, (stream, 98))
    column = values[:, 0]
    return MCEstimate(float(column.mean()), float(np.std(column, ddof=1) / math.sqrt(n_samples)), n_samples, seed, rejected)
