import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..dynamics.models import Configuration
from ..functionals.sampling import SamplingSpec, overlaps, stream_rng
from ..utils.geometry import random_allowed_positions


logger = logging.getLogger(__name__)


RESOURCES_DIR = Path(__file__).resolve().parents[3] / "resources"
DEFAULT_POINTS_FILE = RESOURCES_DIR / "fixtures" / "points.json"
DEFAULT_VALUES_FILE = RESOURCES_DIR / "fixtures" / "dual_values.json"

LabeledPoint = Tuple[str, Configuration]


def load_points(path: Optional[Path] = None) -> Dict[int, List[LabeledPoint]]:
    """Evaluation points grouped by particle number, from a JSON list of configurations."""
    path = Path(path) if path is not None else DEFAULT_POINTS_FILE
    if not path.exists():
        logger.warning(f"Points file {path} not found, using random points only")
        return {}
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    sigma = float(data.get("sigma", 1.0))
    grouped: Dict[int, List[LabeledPoint]] = {}
    for entry in data["points"]:
        c = Configuration(np.array(entry["positions"], dtype=float), np.array(entry["momenta"], dtype=float), sigma)
        if not c.is_allowed():
            logger.warning(f"Skipping overlapping fixture {entry['id']}")
            continue
        grouped.setdefault(c.n, []).append((str(entry["id"]), c))
    logger.info(f"Loaded {sum(len(v) for v in grouped.values())} fixture points from {path}")
    return grouped


def random_points(s: int, count: int, seed: int, sigma: float = 1.0, center=(5.0, 5.0, 5.0), spread: float = 1.5) -> List[LabeledPoint]:
    """Allowed s-particle points with unit-variance momenta, one counter-keyed stream per s."""
    rng = stream_rng(seed, 41, s)
    points = []
    for index in range(count):
        positions = random_allowed_positions(rng, s, sigma, center, spread)
        momenta = rng.standard_normal((s, 3))
        points.append((f"rand-s{s}-{index}", Configuration(positions, momenta, sigma)))
    return points


def state_points(s: int, count: int, spec: SamplingSpec, seed: int) -> List[LabeledPoint]:
    """Evaluation points for state components, drawn from the sampling law."""
    rng = stream_rng(seed, 43, s)
    points = []
    while len(points) < count:
        q, p = spec.draw(rng, s)
        if overlaps(q, spec.sigma):
            continue
        points.append((f"state-s{s}-{len(points)}", Configuration(q, p, spec.sigma)))
    return points


def regression_path(regression_file: Optional[str], out: str, freeze: bool = False) -> Path:
    """Frozen-values file: regression_file when set, else out/dual_values.json for freezing, else the shipped file."""
    if regression_file:
        return Path(regression_file)
    if freeze:
        return Path(out) / DEFAULT_VALUES_FILE.name
    return DEFAULT_VALUES_FILE


class RegressionFixtures:
    """Frozen dual values compared to a tolerance; new keys are recorded only when freezing."""

    TOLERANCE = 1e-10

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path is not None else DEFAULT_VALUES_FILE
        self.values: Dict[str, float] = {}
        self._load()

    def _load(self):
        if self.path.exists():
            try:
                with open(self.path, "r", encoding="utf-8") as f:
                    self.values = {key: float(value) for key, value in json.load(f).items()}
                logger.info(f"Loaded {len(self.values)} regression values")
            except Exception as e:
                logger.warning(f"Failed to load regression values: {e}")
                self.values = {}

    def save(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as f:
            json.dump(self.values, f, indent=2, sort_keys=True)
        logger.info(f"Saved {len(self.values)} regression values")

    @staticmethod
    def key(observable: str, s: int, t: float, point_id: str) -> str:
        return f"{observable}|s={s}|t={t!r}|{point_id}"

    def check(self, key: str, value: float) -> Optional[bool]:
        """None when the key is not frozen yet."""
        if key not in self.values:
            return None
        frozen = self.values[key]
        return abs(value - frozen) <= self.TOLERANCE * max(1.0, abs(frozen))

    def freeze(self, key: str, value: float):
        self.values[key] = float(value)
