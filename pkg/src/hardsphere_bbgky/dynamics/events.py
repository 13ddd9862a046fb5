import logging
import math
from typing import Optional, Tuple

import numpy as np

from .models import (
    EVENT_TOLERANCE,
    CollisionEvent,
    CollisionPreconditionError,
    Configuration,
    PathologyFlag,
    PathologyKind,
)


logger = logging.getLogger(__name__)


def apply_collision(p1, p2, eta) -> Tuple[np.ndarray, np.ndarray]:
    """Elastic exchange of the momentum component along eta.

    eta must lie in the half sphere ⟨eta, p1 - p2⟩ > 0.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if abs(float(np.linalg.norm(eta)) - 1.0) > 1e-12:
        raise CollisionPreconditionError(f"eta={eta} is not a unit vector")
    transfer = float(np.dot(eta, p1 - p2))
    if transfer <= 0.0:
        raise CollisionPreconditionError(f"⟨eta, p1 - p2⟩ = {transfer:.3g} <= 0")
    return p1 - transfer * eta, p2 + transfer * eta


def contact_times(positions: np.ndarray, momenta: np.ndarray, sigma: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Forward contact time of every approaching pair, inf where a pair never meets.

    Returns (i, j, times, relative speeds) over the upper triangle of pairs.
    """
    i, j = np.triu_indices(len(positions), k=1)
    r = positions[i] - positions[j]
    v = momenta[i] - momenta[j]
    b = np.einsum("ij,ij->i", r, v)
    vv = np.einsum("ij,ij->i", v, v)
    gap = np.einsum("ij,ij->i", r, r) - sigma * sigma
    discriminant = b * b - vv * gap

    times = np.full(len(i), np.inf)
    hit = (b < 0.0) & (discriminant > 0.0)
    # Stable root of vv t^2 + 2 b t + gap = 0: gap / (-b + sqrt(disc)).
    times[hit] = gap[hit] / (-b[hit] + np.sqrt(discriminant[hit]))
    overlapping = hit & (gap < 0.0)
    times[overlapping] = 0.0
    return i, j, times, np.sqrt(vv)


def _earliest_event(
    positions: np.ndarray, momenta: np.ndarray, sigma: float
) -> Tuple[Optional[CollisionEvent], Optional[PathologyFlag]]:
    if len(positions) < 2:
        return None, None
    i, j, times, speeds = contact_times(positions, momenta, sigma)
    order = np.argsort(times, kind="stable")
    first = order[0]
    t = float(times[first])
    if not math.isfinite(t):
        return None, None

    a, b = int(i[first]), int(j[first])
    separation = positions[a] - positions[b] + t * (momenta[a] - momenta[b])
    eta = separation / np.linalg.norm(separation)
    event = CollisionEvent(t, (a, b), tuple(float(x) for x in eta))

    if len(order) > 1 and math.isfinite(times[order[1]]):
        finite = np.isfinite(times)
        tolerance = EVENT_TOLERANCE * sigma / max(float(speeds[finite].max()), 1e-300)
        second = order[1]
        if float(times[second]) - t <= tolerance:
            shares = {a, b} & {int(i[second]), int(j[second])}
            kind = PathologyKind.TRIPLE_CONTACT if shares else PathologyKind.SIMULTANEOUS_PAIRS
            return event, PathologyFlag(kind, t)
    return event, None


def next_collision(c: Configuration) -> Tuple[Optional[CollisionEvent], Optional[PathologyFlag]]:
    """Earliest future contact of an approaching pair, plus a flag when it is not isolated."""
    if not c.is_allowed():
        raise ValueError(f"{c} overlaps: min distance {c.min_pair_distance():.12g}")
    return _earliest_event(c.positions, c.momenta, c.sigma)


def resolve_event(positions: np.ndarray, momenta: np.ndarray, event: CollisionEvent, sigma: float):
    """Apply the collision in place at contact; the pair is put back at distance sigma exactly."""
    a, b = event.pair
    eta = np.asarray(event.eta)
    momenta[b], momenta[a] = apply_collision(momenta[b], momenta[a], eta)
    middle = 0.5 * (positions[a] + positions[b])
    positions[a] = middle + 0.5 * sigma * eta
    positions[b] = middle - 0.5 * sigma * eta
