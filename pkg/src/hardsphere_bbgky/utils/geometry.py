import math
from typing import Optional, Sequence, Tuple

import numpy as np


def unit_vector(v: Sequence[float]) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("zero vector has no direction")
    return v / norm


def min_distance(positions: np.ndarray) -> float:
    n = len(positions)
    if n < 2:
        return math.inf
    i, j = np.triu_indices(n, k=1)
    return float(np.min(np.linalg.norm(positions[i] - positions[j], axis=1)))


def random_allowed_positions(
    rng: np.random.Generator,
    n: int,
    sigma: float = 1.0,
    center: Sequence[float] = (5.0, 5.0, 5.0),
    spread: float = 1.5,
    margin: float = 0.0,
    max_tries: int = 10_000,
) -> np.ndarray:
    """n Gaussian positions around center with all pair distances at least sigma + margin."""
    center = np.asarray(center, dtype=float)
    for _ in range(max_tries):
        positions = center + spread * rng.standard_normal((n, 3))
        if min_distance(positions) >= sigma + margin:
            return positions
    raise RuntimeError(f"no allowed placement of {n} spheres within {max_tries} tries")


def head_on_pair(
    gap: float = 1.0,
    speed: float = 1.0,
    center: Sequence[float] = (5.0, 5.0, 5.0),
    sigma: float = 1.0,
    axis: Optional[Sequence[float]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Two spheres a surface gap apart moving straight at each other; contact after gap / (2·speed)."""
    direction = unit_vector(axis if axis is not None else (1.0, 0.0, 0.0))
    center = np.asarray(center, dtype=float)
    half = 0.5 * (sigma + gap)
    positions = np.array([center - half * direction, center + half * direction])
    momenta = np.array([speed * direction, -speed * direction])
    return positions, momenta


def format_float(value: float) -> str:
    """Shortest round-tripping text, so equal runs print identical files."""
    return repr(float(value))
