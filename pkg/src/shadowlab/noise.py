"""Small random perturbations of a map and the Markov chains they generate.

A kernel moves ``f(x)`` by a random displacement drawn from a rotation
invariant density supported in the closed ball of radius ``epsilon``. The
displacement does not depend on ``x``, so a random orbit is fully determined
by its starting point and the sequence of displacements.

Random streams: the ``i``-th orbit of an experiment with master seed ``s``
draws from ``numpy.random.Generator(PCG64(SeedSequence(s, spawn_key=(i,))))``,
see :func:`orbit_stream`. Each orbit owns its stream, so orbits can be
generated in any order or in parallel with identical results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import MapSpec, apply
from .errors import UsageError
from .phase_space import canonicalize, dist

__all__ = [
    "SHAPES",
    "NoiseKernel",
    "RandomOrbit",
    "PseudoOrbitCheck",
    "orbit_stream",
    "as_generator",
    "sample_step",
    "random_orbit",
    "random_orbits",
    "verify_pseudo_orbit",
]

SHAPES = ("uniform-ball", "cosine-bump")
MAX_EPSILON = 0.25


def orbit_stream(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(index,))))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise UsageError(f"expected a numpy Generator or an integer seed, got {type(rng).__name__}")


@dataclass(frozen=True)
class NoiseKernel:
    """The transition family ``P_eps(. | x)``: ``f(x)`` plus a ball-supported displacement.

    ``cosine-bump`` has radial density proportional to ``1 + cos(pi r / eps)``,
    which vanishes smoothly at the boundary of the ball. ``epsilon = 0`` is
    the degenerate deterministic kernel, meant only for oracle runs.
    """

    epsilon: float
    shape: str = "uniform-ball"

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise UsageError(f"unknown kernel shape {self.shape!r}; choose from {SHAPES}")
        if not (0.0 <= self.epsilon < MAX_EPSILON):
            raise UsageError(f"epsilon must lie in [0, {MAX_EPSILON}), got {self.epsilon}")

    @property
    def degenerate(self) -> bool:
        return self.epsilon == 0.0

    def normalizer(self, dim: int) -> float:
        """Integral of the unnormalized profile over the ball."""
        e = self.epsilon
        if self.shape == "uniform-ball":
            return 2.0 * e if dim == 1 else math.pi * e * e
        # 1-D: int_{-e}^{e} (1 + cos(pi u / e)) du = 2e
        # 2-D: int_0^e (1 + cos(pi r / e)) 2 pi r dr = e^2 (pi - 4/pi)
        return 2.0 * e if dim == 1 else e * e * (math.pi - 4.0 / math.pi)

    def profile(self, r):
        """Unnormalized radial profile; zero outside the closed ball."""
        r = np.abs(np.asarray(r, dtype=float))
        inside = r <= self.epsilon
        if self.shape == "uniform-ball":
            return inside.astype(float)
        return np.where(inside, 1.0 + np.cos(np.pi * np.minimum(r, self.epsilon) / self.epsilon), 0.0)

    def density(self, displacement, dim: int):
        """Density of a displacement vector (last axis of length 2 on the torus)."""
        if self.degenerate:
            raise UsageError("the degenerate kernel has no density")
        u = np.asarray(displacement, dtype=float)
        r = np.abs(u) if dim == 1 else np.sqrt(np.sum(u * u, axis=-1))
        return self.profile(r) / self.normalizer(dim)

    def cdf_1d(self, u):
        """Distribution function of the circle displacement, on the real line."""
        e = self.epsilon
        u = np.clip(np.asarray(u, dtype=float), -e, e)
        if self.shape == "uniform-ball":
            return (u + e) / (2.0 * e)
        return (u + e + (e / np.pi) * np.sin(np.pi * u / e)) / (2.0 * e)

    def displacements(self, rng: np.random.Generator, size: int, dim: int) -> np.ndarray:
        """Draw ``size`` displacements; shape ``(size,)`` on S^1 and ``(size, 2)`` on T^2."""
        e = self.epsilon
        if self.degenerate:
            return np.zeros(size if dim == 1 else (size, 2))
        if dim == 1 and self.shape == "uniform-ball":
            return e * (2.0 * rng.random(size) - 1.0)
        if self.shape == "uniform-ball":
            accept = lambda r: r <= e  # noqa: E731
            rate = math.pi / 4.0
        else:
            accept = None
            rate = 0.5 if dim == 1 else (math.pi - 4.0 / math.pi) / 8.0
        return _rejection(rng, size, dim, e, rate, accept or self._bump_accept(rng))

    def _bump_accept(self, rng):
        def accept(r):
            return rng.random(r.shape) * 2.0 < self.profile(r)

        return accept

    @classmethod
    def from_config(cls, section: dict, epsilon: float | None = None) -> "NoiseKernel":
        eps = section.get("epsilon") if epsilon is None else epsilon
        if isinstance(eps, list):
            eps = eps[0]
        return cls(float(eps), section.get("shape", "uniform-ball"))


def _rejection(rng, size, dim, eps, rate, accept):
    chunks, have = [], 0
    while have < size:
        m = int((size - have) / rate * 1.1) + 16
        cand = eps * (2.0 * rng.random(m if dim == 1 else (m, dim)) - 1.0)
        r = np.abs(cand) if dim == 1 else np.sqrt(np.sum(cand * cand, axis=-1))
        keep = cand[accept(r)]
        chunks.append(keep)
        have += len(keep)
    return np.concatenate(chunks)[:size]


def sample_step(kernel: NoiseKernel, fmap: MapSpec, x, rng) -> np.ndarray:
    """One transition of the chain: a draw from ``P_eps(. | x)``."""
    fx = apply(fmap, x)
    if kernel.degenerate:
        return fx
    dim = fmap.space.dim
    single = np.ndim(fx) == dim - 1
    disp = kernel.displacements(as_generator(rng), 1 if single else len(fx), dim)
    if single:
        disp = disp[0]
    return canonicalize(fx + disp)


class RandomOrbit(NamedTuple):
    points: np.ndarray
    kernel: NoiseKernel
    seed: object = None

    def __len__(self):
        return len(self.points)


def _iterate(fmap: MapSpec, x0, disp: np.ndarray) -> np.ndarray:
    """``x_{j+1} = f(x_j) + disp_j mod 1`` with plain floats."""
    n = len(disp)
    if fmap.family == "cat":
        x, y = (float(v) for v in canonicalize(x0))
        dx, dy = disp[:, 0].tolist(), disp[:, 1].tolist()
        xs, ys = [x], [y]
        for j in range(n):
            x, y = (2.0 * x + y + dx[j]) % 1.0, (x + y + dy[j]) % 1.0
            if x >= 1.0:
                x = 0.0
            if y >= 1.0:
                y = 0.0
            xs.append(x)
            ys.append(y)
        return np.column_stack([xs, ys])
    x = float(canonicalize(x0))
    d = disp.tolist()
    out = [x]
    if fmap.family == "linear":
        k = float(fmap.k)
        for j in range(n):
            x = (k * x + d[j]) % 1.0
            if x >= 1.0:
                x = 0.0
            out.append(x)
    else:
        a, sin, tp = fmap.a, math.sin, 2.0 * math.pi
        for j in range(n):
            x = (2.0 * x + a * sin(tp * x) + d[j]) % 1.0
            if x >= 1.0:
                x = 0.0
            out.append(x)
    return np.asarray(out)


def random_orbit(kernel: NoiseKernel, fmap: MapSpec, x0, n: int, rng) -> RandomOrbit:
    """Realization ``(x_0, ..., x_n)`` of the perturbed chain started at ``x0``.

    All ``n`` displacements are drawn up front from ``rng``, so the result is
    a deterministic function of the generator state.
    """
    if n < 1:
        raise UsageError("random orbit length n must be >= 1")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = as_generator(rng)
    disp = kernel.displacements(gen, n, fmap.space.dim)
    return RandomOrbit(_iterate(fmap, x0, disp), kernel, seed)


def random_orbits(kernel: NoiseKernel, fmap: MapSpec, x0s, n: int, master_seed: int, first_index: int = 0):
    """Independent random orbits, orbit ``i`` driven by ``orbit_stream(master_seed, first_index + i)``."""
    return [
        random_orbit(kernel, fmap, x0, n, orbit_stream(master_seed, first_index + i)).points
        for i, x0 in enumerate(x0s)
    ]


class PseudoOrbitCheck(NamedTuple):
    valid: bool
    max_gap: float
    worst_index: int


def pseudo_orbit_gaps(fmap: MapSpec, seq) -> np.ndarray:
    seq = np.asarray(seq, dtype=float)
    return dist(fmap.space, apply(fmap, seq[:-1]), seq[1:])


def verify_pseudo_orbit(fmap: MapSpec, seq, delta: float) -> PseudoOrbitCheck:
    """Check ``d(f(x_j), x_{j+1}) <= delta`` along the whole sequence."""
    seq = np.asarray(seq, dtype=float)
    if len(seq) < 2:
        raise UsageError("a pseudo-orbit needs at least two points")
    gaps = pseudo_orbit_gaps(fmap, seq)
    worst = int(np.argmax(gaps))
    max_gap = float(gaps[worst])
    return PseudoOrbitCheck(max_gap <= delta, max_gap, worst)
