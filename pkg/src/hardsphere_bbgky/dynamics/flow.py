import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .events import _earliest_event, contact_times, resolve_event
from .models import (
    MAX_EVENTS_PER_EVOLVE,
    MAX_PARTICLES,
    Configuration,
    ConfigurationError,
    PathologyError,
    PathologyFlag,
    PathologyKind,
)


logger = logging.getLogger(__name__)


PhaseFunction = Callable[[np.ndarray, np.ndarray], float]


@dataclass
class TrajectoryRecorder:
    """Collects the state of every particle at each collision time."""

    rows: List[Tuple[float, int, float, float, float, float, float, float]] = field(default_factory=list)
    events: int = 0

    COLUMNS = ("t", "i", "qx", "qy", "qz", "px", "py", "pz")

    def record(self, t: float, positions: np.ndarray, momenta: np.ndarray):
        self.events += 1
        for index, (q, p) in enumerate(zip(positions, momenta)):
            self.rows.append((t, index, *map(float, q), *map(float, p)))

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(self.COLUMNS)
            for row in self.rows:
                writer.writerow([repr(value) if isinstance(value, float) else value for value in row])
        logger.info(f"Trajectory with {self.events} events written to {path}")
        return path


def _check_evolvable(c: Configuration):
    if c.n > MAX_PARTICLES:
        raise ConfigurationError(f"{c.n} particles exceed the event-driven cap of {MAX_PARTICLES}")
    if not c.is_allowed():
        raise ConfigurationError(f"{c} overlaps: min distance {c.min_pair_distance():.12g}")


def _evolve_forward(c: Configuration, t: float, recorder: Optional[TrajectoryRecorder], direction: float) -> Configuration:
    positions = np.array(c.positions)
    momenta = np.array(c.momenta)
    elapsed = 0.0
    count = 0
    while True:
        event, flag = _earliest_event(positions, momenta, c.sigma)
        if event is None or elapsed + event.time >= t:
            positions += (t - elapsed) * momenta
            break
        if flag is not None:
            raise PathologyError(PathologyFlag(flag.kind, direction * (elapsed + flag.time)))
        positions += event.time * momenta
        elapsed += event.time
        resolve_event(positions, momenta, event, c.sigma)
        count += 1
        if count > MAX_EVENTS_PER_EVOLVE:
            raise PathologyError(PathologyFlag(PathologyKind.COLLISION_CASCADE, direction * elapsed))
        logger.debug(f"collision of particles {event.labels} at t={direction * elapsed:.9g}")
        if recorder is not None:
            recorder.record(direction * elapsed, positions, direction * momenta)
    return Configuration(positions, momenta, c.sigma)


def evolve(c: Configuration, t: float, recorder: Optional[TrajectoryRecorder] = None) -> Configuration:
    """Hard-sphere flow over time t; negative t runs the reversed flow forward."""
    if not math.isfinite(t):
        raise ValueError(f"evolution time must be finite, got {t}")
    _check_evolvable(c)
    if t == 0.0 or c.n == 0:
        return c
    if t < 0.0:
        return _evolve_forward(c.reversed(), -t, recorder, -1.0).reversed()
    return _evolve_forward(c, t, recorder, 1.0)


def act_on_observable(b: PhaseFunction, c: Configuration, t: float) -> float:
    """(S(t)b)(c): b at the evolved configuration, 0 on forbidden configurations."""
    if not c.is_allowed():
        return 0.0
    evolved = evolve(c, t)
    return float(b(evolved.positions, evolved.momenta))


def act_on_state(f: PhaseFunction, c: Configuration, t: float) -> float:
    """(S*(t)f)(c) = (S(-t)f)(c)."""
    return act_on_observable(f, c, -t)


class ClusterFlowCache:
    """Evolved sub-configurations of one configuration over one time, per label subset.

    A product of group operators over disjoint clusters acts on a function
    of their union by evolving each cluster on its own; blocks shared
    between terms of a cumulant are evolved once.
    """

    def __init__(self, c: Configuration, t: float):
        self.configuration = c
        self.t = t
        self._flows: Dict[FrozenSet[int], Optional[Configuration]] = {}

    def flow(self, indices: Iterable[int]) -> Optional[Configuration]:
        """Evolved cluster in increasing index order; None if the cluster starts forbidden."""
        key = frozenset(indices)
        if key not in self._flows:
            cluster = self.configuration.subset(sorted(key))
            self._flows[key] = evolve(cluster, self.t) if cluster.is_allowed() else None
        return self._flows[key]

    def block_point(self, blocks: Sequence[Iterable[int]]) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """Positions and momenta of the union of blocks, each block evolved independently.

        Rows follow increasing original index. None when any block is forbidden.
        """
        rows: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        for block in blocks:
            block = sorted(block)
            evolved = self.flow(block)
            if evolved is None:
                return None
            for position, index in enumerate(block):
                rows[index] = (evolved.positions[position], evolved.momenta[position])
        order = sorted(rows)
        if not order:
            return np.zeros((0, 3)), np.zeros((0, 3))
        return (
            np.array([rows[index][0] for index in order]),
            np.array([rows[index][1] for index in order]),
        )

    def evaluate(self, b: PhaseFunction, blocks: Sequence[Iterable[int]]) -> float:
        point = self.block_point(blocks)
        if point is None:
            return 0.0
        return float(b(*point))

    def __len__(self) -> int:
        return len(self._flows)


def free_contact_time(c: Configuration) -> float:
    """Shortest |t| over both time directions after which free streaming brings a pair into contact."""
    if c.n < 2:
        return math.inf
    _, _, forward, _ = contact_times(c.positions, c.momenta, c.sigma)
    _, _, backward, _ = contact_times(c.positions, -c.momenta, c.sigma)
    return float(min(forward.min(), backward.min()))


def free_generator(b: PhaseFunction, c: Configuration, h: float) -> float:
    """Central difference of b along free streaming: Σ ⟨p_i, ∂_{q_i} b⟩ to O(h²)."""
    ahead = c.streamed(h)
    behind = c.streamed(-h)
    return (float(b(ahead.positions, ahead.momenta)) - float(b(behind.positions, behind.momenta))) / (2.0 * h)
