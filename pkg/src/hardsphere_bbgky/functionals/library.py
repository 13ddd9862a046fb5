"""Concrete smooth test functions for observables and states.

Every n-particle function here takes (q, p) arrays of shape (n, 3) and is
symmetric under particle relabeling. Functions that must vanish on
overlapping configurations are built through ``ZeroOnForbidden``.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy import integrate

from .sampling import overlaps


PhaseFunction = Callable[[np.ndarray, np.ndarray], float]


def bump(r, radius: float):
    """exp(1 - 1/(1 - (r/R)^2)) inside the ball, 0 outside; equals 1 at r = 0."""
    x = np.clip(np.asarray(r, dtype=float) / radius, 0.0, 1.0)
    out = np.zeros_like(x)
    inside = x < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out if out.ndim else float(out)


@lru_cache(maxsize=256)
def radial_moment(radius: float, power: int = 0) -> float:
    """∫_{R^3} |x|^power bump(|x|) dx by radial quadrature."""
    value, _ = integrate.quad(lambda r: 4.0 * math.pi * r ** (2 + power) * bump(r, radius), 0.0, radius, limit=200)
    return value


@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        return self.value


@dataclass(frozen=True)
class ZeroOnForbidden:
    """Wraps a phase function so it vanishes whenever two spheres overlap."""

    inner: PhaseFunction
    sigma: float = 1.0

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        if overlaps(q, self.sigma * (1.0 - 1e-10)):
            return 0.0
        return float(self.inner(q, p))


@dataclass(frozen=True)
class OneParticleBump:
    """b(q, p) = bump(|q - c|, Rq)·bump(|p - u|, Rp)·(a0 + a1|q - c|^2 + a2|p - u|^2 + a3 p_x)."""

    center: Tuple[float, float, float] = (5.0, 5.0, 5.0)
    radius_q: float = 2.0
    radius_p: float = 2.0
    drift: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    coefficients: Tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def values(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Per-particle values for (n, 3) arrays."""
        dq = np.asarray(q, dtype=float).reshape(-1, 3) - np.asarray(self.center)
        dp = np.asarray(p, dtype=float).reshape(-1, 3) - np.asarray(self.drift)
        rq2 = np.sum(dq ** 2, axis=1)
        rp2 = np.sum(dp ** 2, axis=1)
        a0, a1, a2, a3 = self.coefficients
        shape = bump(np.sqrt(rq2), self.radius_q) * bump(np.sqrt(rp2), self.radius_p)
        return shape * (a0 + a1 * rq2 + a2 * rp2 + a3 * np.asarray(p).reshape(-1, 3)[:, 0])

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        return float(self.values(q, p)[0])

    def sup_bound(self) -> float:
        a0, a1, a2, a3 = self.coefficients
        p_max = self.radius_p + float(np.linalg.norm(self.drift))
        return abs(a0) + abs(a1) * self.radius_q ** 2 + abs(a2) * self.radius_p ** 2 + abs(a3) * p_max

    def integral(self) -> float:
        """Exact ∫ b dq dp by radial quadrature; the p_x term integrates to drift_x times the base term."""
        a0, a1, a2, a3 = self.coefficients
        q0, q2 = radial_moment(self.radius_q, 0), radial_moment(self.radius_q, 2)
        p0, p2 = radial_moment(self.radius_p, 0), radial_moment(self.radius_p, 2)
        return a0 * q0 * p0 + a1 * q2 * p0 + a2 * q0 * p2 + a3 * self.drift[0] * q0 * p0


@dataclass(frozen=True)
class AdditiveFunction:
    """Σ_i b(x_i) over the particles of the configuration."""

    one: OneParticleBump

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        if len(q) == 0:
            return 0.0
        return float(np.sum(self.one.values(q, p)))


@dataclass(frozen=True)
class ProductFunction:
    """Π_i b(x_i); the empty product is 1."""

    one: OneParticleBump

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        if len(q) == 0:
            return 1.0
        return float(np.prod(self.one.values(q, p)))


@dataclass(frozen=True)
class PairFunction:
    """Σ_{i<j} w(|q_i - q_j|)·bump(|p_i|, Rp)·bump(|p_j|, Rp) with w a bump of range `reach` beyond contact."""

    sigma: float = 1.0
    reach: float = 1.5
    radius_p: float = 2.0
    amplitude: float = 1.0

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        n = len(q)
        if n < 2:
            return 0.0
        i, j = np.triu_indices(n, k=1)
        distances = np.linalg.norm(q[i] - q[j], axis=1)
        momentum = bump(np.linalg.norm(p, axis=1), self.radius_p)
        radial = bump(np.maximum(distances - self.sigma, 0.0), self.reach)
        radial = np.where(distances < self.sigma, 0.0, radial)
        return float(self.amplitude * np.sum(radial * momentum[i] * momentum[j]))


@dataclass(frozen=True)
class KineticEnergy:
    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        return 0.5 * float(np.sum(np.asarray(p) ** 2))


@dataclass(frozen=True)
class Maxwellian:
    """Normalized Gaussian in all momenta, times a constant position factor."""

    beta: float = 1.0
    amplitude: float = 1.0

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        n = len(p)
        norm = (self.beta / (2.0 * math.pi)) ** (1.5 * n)
        return self.amplitude * norm * math.exp(-0.5 * self.beta * float(np.sum(np.asarray(p) ** 2)))


@dataclass(frozen=True)
class PositionPolynomial:
    """Σ_i (c1·q_{i,x} + c2·q_{i,x}^2 + c3·q_{i,x}^3) + c4·Σ_i sin(q_{i,y})."""

    coefficients: Tuple[float, float, float, float] = (0.0, 1.0, 0.0, 0.0)

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        c1, c2, c3, c4 = self.coefficients
        x = np.asarray(q)[:, 0]
        y = np.asarray(q)[:, 1]
        return float(np.sum(c1 * x + c2 * x ** 2 + c3 * x ** 3 + c4 * np.sin(y)))


def random_bump(rng: np.random.Generator, center=(5.0, 5.0, 5.0), radius_q: float = 2.0, radius_p: float = 2.0) -> OneParticleBump:
    """A random member of the bump family with bounded polynomial coefficients."""
    coefficients = (
        float(rng.uniform(0.5, 1.5)),
        float(rng.uniform(-0.2, 0.2)),
        float(rng.uniform(-0.2, 0.2)),
        float(rng.uniform(-0.5, 0.5)),
    )
    return OneParticleBump(tuple(center), radius_q, radius_p, (0.0, 0.0, 0.0), coefficients)


@dataclass(frozen=True)
class CanonicalDensity:
    """Unnormalized N-particle density Π_i b(x_i) on non-overlapping configurations."""

    one: OneParticleBump
    sigma: float = 1.0

    def __call__(self, q: np.ndarray, p: np.ndarray) -> float:
        if overlaps(q, self.sigma * (1.0 - 1e-10)):
            return 0.0
        return float(np.prod(self.one.values(q, p))) if len(q) else 1.0


def positive_bump(center=(5.0, 5.0, 5.0), radius_q: float = 2.0, radius_p: float = 2.0, drift=(0.0, 0.0, 0.0)) -> OneParticleBump:
    """Non-negative bump usable as a one-particle density."""
    return OneParticleBump(tuple(center), radius_q, radius_p, tuple(drift), (1.0, 0.0, 0.0, 0.0))
