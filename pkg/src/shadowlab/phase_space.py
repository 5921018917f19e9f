"""The circle S^1 and the torus T^2 in fractional coordinates.

Points are stored with every coordinate in ``[0, 1)``. A sequence of points
is an array of shape ``(n,)`` on the circle and ``(n, 2)`` on the torus, so
most functions here work equally on single points and on whole orbits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

__all__ = ["Space", "CIRCLE", "TORUS", "PhasePoint", "canonicalize", "dist", "wrap", "space_of"]


@dataclass(frozen=True)
class Space:
    dim: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise UsageError(f"only S^1 (dim=1) and T^2 (dim=2) are supported, got dim={self.dim}")

    @property
    def name(self) -> str:
        return "S1" if self.dim == 1 else "T2"

    @property
    def diameter(self) -> float:
        return 0.5 if self.dim == 1 else math.sqrt(0.5)

    def canonicalize(self, coords) -> np.ndarray:
        out = canonicalize(coords)
        self.check_shape(out)
        return out

    def check_shape(self, points: np.ndarray) -> None:
        if self.dim == 1 and points.ndim > 1:
            raise UsageError(f"expected circle points, got array of shape {points.shape}")
        if self.dim == 2 and (points.ndim == 0 or points.shape[-1] != 2):
            raise UsageError(f"expected torus points with 2 coordinates, got shape {points.shape}")

    def dist(self, a, b) -> np.ndarray | float:
        return dist(self, a, b)


CIRCLE = Space(1)
TORUS = Space(2)


def space_of(dim: int) -> Space:
    return CIRCLE if dim == 1 else TORUS if dim == 2 else Space(dim)


def canonicalize(coords) -> np.ndarray:
    """Reduce coordinates mod 1 into ``[0, 1)``.

    ``np.mod`` can return exactly 1.0 for tiny negative inputs, so that case
    is folded back to 0.
    """
    x = np.asarray(coords, dtype=float)
    if not np.all(np.isfinite(x)):
        raise UsageError("coordinates must be finite")
    y = np.mod(x, 1.0)
    y = np.where(y >= 1.0, 0.0, y)
    return y if y.ndim else np.float64(y)


def wrap(delta) -> np.ndarray:
    """Lift a coordinate difference into ``[-0.5, 0.5)``."""
    d = np.asarray(delta, dtype=float)
    return d - np.floor(d + 0.5)


def dist(space: Space, a, b):
    """Wraparound distance; Euclidean norm of per-coordinate circle distances on T^2.

    Circle arrays of any shape are compared elementwise, torus arrays along
    their last axis.
    """
    a = _coords(space, a)
    b = _coords(space, b)
    if space.dim == 2 and (a.shape[-1:] != (2,) or b.shape[-1:] != (2,)):
        raise UsageError("torus distance needs points with 2 coordinates")
    d = np.abs(a - b) % 1.0
    d = np.minimum(d, 1.0 - d)
    if space.dim == 2:
        return np.sqrt(np.sum(d * d, axis=-1))
    return d


def _coords(space: Space, p) -> np.ndarray:
    if isinstance(p, PhasePoint):
        if len(p.coords) != space.dim:
            raise UsageError(f"point {p.coords} does not live in {space.name}")
        return np.asarray(p.coords if space.dim == 2 else p.coords[0], dtype=float)
    return np.asarray(p, dtype=float)


@dataclass(frozen=True)
class PhasePoint:
    """A single canonical point. Use plain arrays for sequences."""

    coords: tuple[float, ...]

    @classmethod
    def of(cls, *coords: float) -> "PhasePoint":
        c = canonicalize(np.asarray(coords, dtype=float))
        return cls(tuple(float(v) for v in np.atleast_1d(c)))

    @property
    def space(self) -> Space:
        return space_of(len(self.coords))

    def as_array(self):
        return self.coords[0] if len(self.coords) == 1 else np.array(self.coords)
