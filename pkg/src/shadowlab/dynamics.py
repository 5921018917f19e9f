"""Concrete maps with the shadowing property.

Three families are supported:

* ``linear``    x -> k x mod 1 on the circle, integer k >= 2
* ``nonlinear`` x -> 2x + a sin(2 pi x) mod 1 on the circle, |a| < 1/(2 pi)
* ``cat``       v -> A v mod 1 on the torus, A = [[2, 1], [1, 1]]

All functions accept a single point or an array of points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NumericalError, UsageError
from .phase_space import CIRCLE, TORUS, Space, canonicalize, dist

__all__ = [
    "CAT_MATRIX",
    "MapSpec",
    "Preimage",
    "linear",
    "nonlinear",
    "cat_map",
    "map_from_config",
    "apply",
    "orbit",
    "inverse_branch",
    "preimages",
    "nearest_inverse_branch",
    "nearest_preimages",
    "cat_eigensystem",
    "digit_orbit",
    "typical_orbit",
]

FAMILIES = ("linear", "nonlinear", "cat")
CAT_MATRIX = np.array([[2.0, 1.0], [1.0, 1.0]])
ROOT_TOL = 1e-14
TIE_TOL = 1e-14
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MapSpec:
    family: str
    k: int = 2
    a: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UsageError(f"unknown map family {self.family!r}; choose from {FAMILIES}")
        if self.family == "linear":
            if int(self.k) != self.k or self.k < 2:
                raise UsageError(f"linear family needs an integer k >= 2, got {self.k}")
            object.__setattr__(self, "k", int(self.k))
        if self.family == "nonlinear":
            if not math.isfinite(self.a) or abs(self.a) >= 1.0 / TWO_PI:
                raise UsageError(f"nonlinear family needs |a| < 1/(2 pi), got a={self.a}")

    @property
    def space(self) -> Space:
        return TORUS if self.family == "cat" else CIRCLE

    @property
    def is_expanding(self) -> bool:
        return self.family != "cat"

    @property
    def degree(self) -> int:
        if self.family == "linear":
            return self.k
        if self.family == "nonlinear":
            return 2
        raise UsageError("the cat map is invertible; it has no inverse branches")

    @property
    def lam(self) -> float:
        """Uniform expansion lower bound."""
        if self.family == "linear":
            return float(self.k)
        if self.family == "nonlinear":
            return 2.0 - TWO_PI * abs(self.a)
        return (3.0 + math.sqrt(5.0)) / 2.0

    @property
    def lipschitz(self) -> float:
        if self.family == "linear":
            return float(self.k)
        if self.family == "nonlinear":
            return 2.0 + TWO_PI * abs(self.a)
        return (3.0 + math.sqrt(5.0)) / 2.0

    @property
    def lebesgue_invariant(self) -> bool:
        return self.family in ("linear", "cat")

    @property
    def name(self) -> str:
        if self.family == "linear":
            return f"linear(k={self.k})"
        if self.family == "nonlinear":
            return f"nonlinear(a={self.a:g})"
        return "cat"

    def __call__(self, p):
        return apply(self, p)


def linear(k: int = 2) -> MapSpec:
    return MapSpec("linear", k=k)


def nonlinear(a: float) -> MapSpec:
    return MapSpec("nonlinear", a=float(a))


def cat_map() -> MapSpec:
    return MapSpec("cat")


def map_from_config(section: dict) -> MapSpec:
    family = section.get("family")
    extra = set(section) - {"family", "k", "a"}
    if extra:
        raise UsageError(f"unknown keys in [map]: {sorted(extra)}")
    if family == "linear":
        return linear(section.get("k", 2))
    if family == "nonlinear":
        if "a" not in section:
            raise UsageError("nonlinear map needs parameter 'a'")
        return nonlinear(section["a"])
    if family == "cat":
        return cat_map()
    raise UsageError(f"unknown map family {family!r}; choose from {FAMILIES}")


def _lift(a: float, x):
    return 2.0 * x + a * np.sin(TWO_PI * x)


def _lift_slope(a: float, x):
    return 2.0 + TWO_PI * a * np.cos(TWO_PI * x)


def apply(fmap: MapSpec, p):
    """Image of a point (or an array of points) under the map, canonicalized."""
    x = np.asarray(p, dtype=float)
    if fmap.family == "linear":
        return canonicalize(fmap.k * x)
    if fmap.family == "nonlinear":
        return canonicalize(_lift(fmap.a, x))
    if x.shape[-1:] != (2,):
        raise UsageError("cat map acts on torus points with 2 coordinates")
    return canonicalize(x @ CAT_MATRIX.T)


def orbit(fmap: MapSpec, z0, n: int) -> np.ndarray:
    """Forward orbit ``(z0, f(z0), ..., f^n(z0))`` in double precision.

    Floating-point orbits of ``x -> kx mod 1`` with even ``k`` reach 0 after
    about 53 steps because every float is a dyadic rational; use
    :func:`digit_orbit` when a Lebesgue-typical orbit is wanted.
    """
    if n < 0:
        raise UsageError("orbit length n must be >= 0")
    z = canonicalize(z0)
    if fmap.family == "cat":
        out = np.empty((n + 1, 2))
        x, y = float(z[0]), float(z[1])
        out[0] = x, y
        for j in range(1, n + 1):
            x, y = (2.0 * x + y) % 1.0, (x + y) % 1.0
            out[j] = x, y
        return out
    out = np.empty(n + 1)
    x = float(z)
    out[0] = x
    if fmap.family == "linear":
        k = float(fmap.k)
        for j in range(1, n + 1):
            x = (k * x) % 1.0
            out[j] = x
    else:
        a, sin, tp = fmap.a, math.sin, TWO_PI
        for j in range(1, n + 1):
            x = (2.0 * x + a * sin(tp * x)) % 1.0
            if x >= 1.0:
                x = 0.0
            out[j] = x
    return out


def inverse_branch(fmap: MapSpec, y, branch):
    """Preimage of ``y`` on the ``branch``-th monotone lap.

    For the nonlinear family the laps are ``[b/2, (b+1)/2]`` (the lift fixes
    0, 1/2 and 1), and the preimage is found by Newton's method on the lift,
    falling back to bisection whenever a step leaves the bracket.
    """
    if not fmap.is_expanding:
        raise UsageError("inverse branches exist only for the circle-expanding families")
    y = np.asarray(y, dtype=float)
    b = np.asarray(branch)
    if np.any(b < 0) or np.any(b >= fmap.degree) or np.any(b != np.floor(b)):
        raise UsageError(f"branch must be an integer in [0, {fmap.degree})")
    if fmap.family == "linear":
        return canonicalize((y + b) / fmap.k)
    return canonicalize(_solve_lift(fmap.a, y + b, b / 2.0, (b + 1) / 2.0))


def _solve_lift(a: float, target, lo, hi, max_iter: int = 100):
    target, lo, hi = np.broadcast_arrays(
        np.asarray(target, float), np.asarray(lo, float), np.asarray(hi, float)
    )
    lo = lo.copy()
    hi = hi.copy()
    x = np.clip(target / 2.0, lo, hi)
    for _ in range(max_iter):
        fx = _lift(a, x) - target
        lo = np.where(fx < 0, x, lo)
        hi = np.where(fx > 0, x, hi)
        step = fx / _lift_slope(a, x)
        xn = x - step
        outside = (xn <= lo) | (xn >= hi)
        xn = np.where(outside & (fx != 0), 0.5 * (lo + hi), xn)
        done = (np.abs(xn - x) <= ROOT_TOL) | (fx == 0)
        x = np.where(fx == 0, x, xn)
        if np.all(done):
            return x
    raise NumericalError(
        f"inverse-branch root finder did not reach {ROOT_TOL:g} in {max_iter} iterations"
    )


def preimages(fmap: MapSpec, y) -> np.ndarray:
    """All preimages of ``y``; the last axis runs over branches."""
    if not fmap.is_expanding:
        raise UsageError("inverse branches exist only for the circle-expanding families")
    return _preimages(fmap, np.asarray(y, dtype=float))


def _preimages(fmap: MapSpec, y: np.ndarray) -> np.ndarray:
    b = np.arange(fmap.degree)
    if fmap.family == "linear":
        pre = (y[..., None] + b) / fmap.k
    else:
        pre = _solve_lift(fmap.a, y[..., None] + b, b / 2.0, (b + 1) / 2.0)
    return np.where(pre >= 1.0, pre - 1.0, pre)


class Preimage(NamedTuple):
    point: float
    branch: int
    tie: bool


def nearest_preimages(fmap: MapSpec, y, anchor):
    """Vectorized nearest-preimage selection.

    Returns ``(points, branches, ties)``. Equidistant candidates resolve to the
    smallest branch index and set the tie flag.
    """
    y = np.asarray(y, dtype=float)
    pre = preimages(fmap, y).reshape(-1, fmap.degree)
    d = np.abs(pre - np.asarray(anchor, dtype=float).reshape(-1, 1)) % 1.0
    d = np.minimum(d, 1.0 - d)
    branch = d.argmin(axis=1)
    rows = np.arange(len(d))
    best = d[rows, branch]
    ties = (d <= best[:, None] + TIE_TOL).sum(axis=1) > 1
    return pre[rows, branch].reshape(y.shape), branch.reshape(y.shape), ties.reshape(y.shape)


def nearest_inverse_branch(fmap: MapSpec, y, anchor) -> Preimage:
    point, branch, tie = nearest_preimages(fmap, float(y), float(anchor))
    return Preimage(float(point), int(branch), bool(tie))


def cat_eigensystem():
    """Unstable/stable eigenpairs of the cat matrix and the basis condition number.

    Returns ``(lam_u, lam_s, V, kappa)`` with the unstable eigenvector in
    column 0 of ``V``.
    """
    w, V = np.linalg.eigh(CAT_MATRIX)
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    kappa = float(np.linalg.norm(V, 2) * np.linalg.norm(np.linalg.inv(V), 2))
    return float(w[0]), float(w[1]), V, kappa


def _digits_per_point(k: int) -> int:
    return int(math.ceil(64.0 / math.log2(k))) + 1


def digit_orbit(k: int, digits, n: int) -> np.ndarray:
    """Exact orbit of ``x -> kx mod 1`` for the point with base-``k`` expansion ``digits``.

    The map shifts the expansion, so ``x_j`` is read off from the digits
    ``j+1, j+2, ...``; no rounding accumulates along the orbit.
    """
    digits = np.asarray(digits)
    m = _digits_per_point(k)
    if digits.size < n + m:
        raise UsageError(f"need at least n + {m} digits for an orbit of length n={n}")
    window = np.lib.stride_tricks.sliding_window_view(digits[: n + m].astype(float), m)
    weights = float(k) ** -np.arange(1, m + 1)
    return canonicalize(window[: n + 1] @ weights)


def typical_orbit(fmap: MapSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Orbit of a Lebesgue-random initial point, safe from float collapse."""
    if fmap.family == "linear":
        digits = rng.integers(0, fmap.k, size=n + _digits_per_point(fmap.k))
        return digit_orbit(fmap.k, digits, n)
    z0 = rng.random(fmap.space.dim) if fmap.family == "cat" else rng.random()
    return orbit(fmap, z0, n)
