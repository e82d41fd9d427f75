"""Singlet correlations ``-x.y`` and the geometric Bell violation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from bellkit.kernel import BoundReport, _report

UNIT_TOL = 1e-12
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Setting:
    """A measurement direction: a planar angle or a 3D unit vector.

    Planar settings keep their angle so that dot products between them are
    computed as ``cos(difference)``, which is exact at the usual angles.
    """

    vector: tuple[float, float, float]
    angle: float | None = None

    @classmethod
    def from_angle(cls, theta: float) -> "Setting":
        theta = float(theta) % TWO_PI
        return cls((math.cos(theta), math.sin(theta), 0.0), theta)

    @classmethod
    def from_vector(cls, v: Iterable[float]) -> "Setting":
        v = tuple(float(x) for x in v)
        if len(v) == 2:
            v = v + (0.0,)
        if len(v) != 3:
            raise ValueError("a setting vector needs 2 or 3 components")
        if abs(math.sqrt(sum(x * x for x in v)) - 1.0) > UNIT_TOL:
            raise ValueError(f"setting {v} is not a unit vector")
        return cls(v)

    def dot(self, other: "Setting") -> float:
        if self.angle is not None and other.angle is not None:
            return math.cos(self.angle - other.angle)
        return float(np.dot(self.vector, other.vector))


def as_setting(x) -> Setting:
    if isinstance(x, Setting):
        return x
    if np.ndim(x) == 0:
        return Setting.from_angle(float(x))
    return Setting.from_vector(x)


def quantum_corr(x, y) -> float:
    """Singlet correlation ``E(S1_x S2_y) = -x.y``."""
    return -as_setting(x).dot(as_setting(y))


def bell_violation(a, b, c, tol: float = 1e-12) -> BoundReport:
    """``|a.b + b.c| <= 1 + a.c``; ``holds=False`` rules out any local
    realistic model of the singlet correlations at these settings."""
    a, b, c = as_setting(a), as_setting(b), as_setting(c)
    return _report(abs(a.dot(b) + b.dot(c)), 1.0 + a.dot(c), tol)


@dataclass(frozen=True)
class ThetaScan:
    theta: np.ndarray
    value: np.ndarray

    @property
    def argmax(self) -> float:
        return float(self.theta[int(np.argmax(self.value))])

    @property
    def max(self) -> float:
        return float(np.max(self.value))

    @property
    def step(self) -> float:
        return (math.pi / 2) / (len(self.theta) - 1)

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.theta.tolist(), self.value.tolist()))


def theta_scan(n: int) -> ThetaScan:
    """``cos t + sin t`` on ``n`` uniform points of [0, pi/2]."""
    if n < 2:
        raise ValueError("theta_scan needs n >= 2")
    theta = np.linspace(0.0, math.pi / 2, n)
    return ThetaScan(theta, np.cos(theta) + np.sin(theta))


def chsh_quantum(a, a_prime, b, b_prime):
    """``|k(a,b) + k(a,b') + k(a',b) - k(a',b')|`` for planar angles, with
    ``k = -cos(difference)``. Broadcasts."""
    k = lambda x, y: -np.cos(np.subtract(x, y))  # noqa: E731
    return np.abs(k(a, b) + k(a, b_prime) + k(a_prime, b) - k(a_prime, b_prime))


@dataclass(frozen=True)
class ChshMax:
    angles: tuple[float, float, float, float]
    value: float
    refined_angles: tuple[float, float, float, float]
    refined_value: float
    resolution: int


def chsh_quantum_max(resolution: int, refine: bool = True) -> ChshMax:
    """Maximize the singlet CHSH expression over the planar angle grid
    ``2 pi k / resolution``.

    The expression only depends on angle differences and the grid is
    closed under rotation by one step, so ``a = 0`` loses nothing. The grid
    optimum is then polished with Nelder-Mead.
    """
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    grid = np.arange(resolution) * (TWO_PI / resolution)
    b, bp = np.meshgrid(grid, grid, indexing="ij")
    best_value, best = -1.0, (0.0, 0.0, 0.0, 0.0)
    for ap in grid:
        vals = chsh_quantum(0.0, ap, b, bp)
        idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
        if vals[idx] > best_value:
            best_value = float(vals[idx])
            best = (0.0, float(ap), float(b[idx]), float(bp[idx]))
    refined_angles, refined_value = best, best_value
    if refine:
        from scipy.optimize import minimize

        res = minimize(lambda t: -chsh_quantum(0.0, *t), np.array(best[1:]), method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        if -res.fun > refined_value:
            refined_angles = (0.0, *(float(t) % TWO_PI for t in res.x))
            refined_value = float(-res.fun)
    return ChshMax(best, best_value, refined_angles, refined_value, resolution)
