import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..dynamics.models import MAX_PARTICLES
from ..functionals.library import (
    AdditiveFunction,
    CanonicalDensity,
    Constant,
    OneParticleBump,
    PairFunction,
    ProductFunction,
    positive_bump,
)
from ..functionals.sampling import SamplingSpec
from ..functionals.sequences import ObservableSeq, StateSeq
from ..solver.dual import DUAL_ROUTES


logger = logging.getLogger(__name__)


OBSERVABLE_KINDS = ("number", "additive", "kary", "general")
STATE_KINDS = ("canonical",)


class RunConfigError(ValueError):
    """Bad configuration file or command-line usage."""


def _default_observable() -> Dict[str, Any]:
    return {
        "kind": "general",
        "k": 2,
        "center": [5.0, 5.0, 5.0],
        "radius_q": 2.0,
        "radius_p": 2.0,
        "coefficients": [1.0, 0.1, -0.1, 0.2],
    }


def _default_state() -> Dict[str, Any]:
    return {
        "kind": "canonical",
        "n_particles": 3,
        "center": [5.0, 5.0, 5.0],
        "radius_q": 2.0,
        "radius_p": 2.5,
        "drift": [0.0, 0.0, 0.0],
    }


def _default_sampling() -> Dict[str, Any]:
    return {"position_law": "normal", "position_width": 1.2, "chunk_size": 2000}


@dataclass
class RunConfig:
    N_max: int = 4
    sigma: float = 1.0
    box_length: float = 10.0
    beta: float = 1.0
    gamma: float = 0.3
    alpha: float = 3.0
    seed: int = 20240101
    n_samples: int = 4000
    n_max: int = 2
    times: List[float] = field(default_factory=lambda: [0.1, 0.5, 1.0])
    s_values: List[int] = field(default_factory=lambda: [1, 2, 3])
    routes: List[str] = field(default_factory=lambda: ["cumulant", "reduced", "direct"])
    n_random_points: int = 5
    n_duality_pairs: int = 3
    quadrature_nodes: int = 8
    lebedev_order: int = 7
    tolerance_k: float = 3.0
    tail_tolerance: float = 0.05
    points_file: Optional[str] = None
    regression_file: Optional[str] = None
    out: str = "results"
    initial_observable: Dict[str, Any] = field(default_factory=_default_observable)
    initial_state: Dict[str, Any] = field(default_factory=_default_state)
    sampling: Dict[str, Any] = field(default_factory=_default_sampling)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 1 <= self.N_max <= MAX_PARTICLES:
            raise RunConfigError(f"N_max must be in 1..{MAX_PARTICLES}, got {self.N_max}")
        if self.sigma <= 0 or self.box_length <= 0 or self.beta <= 0:
            raise RunConfigError("sigma, box_length and beta must be positive")
        if self.n_samples < 2:
            raise RunConfigError("n_samples must be at least 2")
        if self.n_max < 0:
            raise RunConfigError("n_max must be non-negative")
        if not self.times or not all(isinstance(t, (int, float)) and math.isfinite(t) for t in self.times):
            raise RunConfigError(f"times must be a non-empty list of finite numbers, got {self.times}")
        if any(not 1 <= s <= self.N_max for s in self.s_values):
            raise RunConfigError(f"s_values must lie in 1..N_max={self.N_max}")
        unknown_routes = [route for route in self.routes if route not in DUAL_ROUTES]
        if not self.routes or unknown_routes:
            raise RunConfigError(f"routes must be a non-empty subset of {DUAL_ROUTES}, got {self.routes}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise RunConfigError("seed must be an unsigned 64-bit integer")
        kind = self.initial_observable.get("kind")
        if kind not in OBSERVABLE_KINDS:
            raise RunConfigError(f"initial_observable.kind must be one of {OBSERVABLE_KINDS}, got {kind!r}")
        if self.initial_state.get("kind") not in STATE_KINDS:
            raise RunConfigError(f"initial_state.kind must be one of {STATE_KINDS}")
        particles = self.initial_state.get("n_particles", 0)
        if not 1 <= particles <= self.N_max:
            raise RunConfigError(f"initial_state.n_particles must be in 1..N_max, got {particles}")
        try:
            self.sampling_spec()
        except (TypeError, ValueError) as e:
            raise RunConfigError(f"bad sampling section: {e}") from e
        self._warn_convergence()

    def _warn_convergence(self):
        if self.gamma >= math.exp(-1.0):
            logger.warning(
                f"gamma={self.gamma} violates gamma < 1/e: the dual expansion is only guaranteed in C_gamma for gamma < 1/e"
            )
        if self.alpha <= math.e:
            logger.warning(f"alpha={self.alpha} violates alpha > e: the state series may not converge in L1_alpha")

    def sampling_spec(self) -> SamplingSpec:
        return SamplingSpec(sigma=self.sigma, box_length=self.box_length, beta=self.beta, **self.sampling)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise RunConfigError(f"unknown config keys: {', '.join(unknown)}")
        merged = dict(data)
        # Nested sections merge over their defaults.
        for section, default in (
            ("initial_observable", _default_observable),
            ("initial_state", _default_state),
            ("sampling", _default_sampling),
        ):
            if section in merged:
                if not isinstance(merged[section], dict):
                    raise RunConfigError(f"{section} must be an object")
                merged[section] = {**default(), **merged[section]}
        try:
            return cls(**merged)
        except TypeError as e:
            raise RunConfigError(str(e)) from e


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    config_path = Path(path)
    if not config_path.exists():
        raise RunConfigError(f"config file not found: {config_path}")
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise RunConfigError(f"invalid JSON in {config_path}: {e}") from e
    if not isinstance(data, dict):
        raise RunConfigError("config file must hold a JSON object")
    logger.info(f"Loaded config from {config_path}")
    return RunConfig.from_dict(data)


def apply_overrides(
    config: RunConfig,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    samples: Optional[int] = None,
    nmax: Optional[int] = None,
    times: Optional[List[float]] = None,
) -> RunConfig:
    data = config.to_dict()
    for key, value in (("seed", seed), ("out", out), ("n_samples", samples), ("n_max", nmax), ("times", times)):
        if value is not None:
            data[key] = value
    return RunConfig.from_dict(data)


def parse_times(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise RunConfigError(f"--times expects a comma separated list of numbers, got {text!r}") from e


def _bump(section: Dict[str, Any]) -> OneParticleBump:
    return OneParticleBump(
        tuple(section["center"]),
        float(section["radius_q"]),
        float(section["radius_p"]),
        tuple(section.get("drift", (0.0, 0.0, 0.0))),
        tuple(section.get("coefficients", (1.0, 0.0, 0.0, 0.0))),
    )


def build_observable(config: RunConfig) -> ObservableSeq:
    """B(0) from the initial_observable section."""
    section = config.initial_observable
    kind = section["kind"]
    if kind == "number":
        return ObservableSeq.number(config.N_max, config.sigma)
    one = _bump(section)
    if kind == "additive":
        return ObservableSeq.single(1, AdditiveFunction(one), config.N_max, config.sigma)
    if kind == "kary":
        k = int(section.get("k", 2))
        if not 1 <= k <= config.N_max:
            raise RunConfigError(f"initial_observable.k must be in 1..N_max, got {k}")
        return ObservableSeq.single(k, ProductFunction(one), config.N_max, config.sigma)
    components = [Constant(0.5), AdditiveFunction(one), PairFunction(config.sigma)]
    components += [ProductFunction(one) for _ in range(3, config.N_max + 1)]
    return ObservableSeq(components[: config.N_max + 1], config.sigma)


def build_state(config: RunConfig) -> StateSeq:
    """D with only the N-particle component, a product of positive bumps on allowed configurations."""
    section = config.initial_state
    one = positive_bump(tuple(section["center"]), float(section["radius_q"]), float(section["radius_p"]), tuple(section["drift"]))
    return StateSeq.canonical(CanonicalDensity(one, config.sigma), int(section["n_particles"]), config.N_max, config.sampling_spec())
