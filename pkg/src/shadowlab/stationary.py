"""Stationary measures of the perturbed chain, computed two independent ways.

1. Ulam's method: discretize the transition kernel on a uniform partition
   into a row-stochastic matrix and find its left fixed point by power
   iteration.
2. Monte Carlo: the empirical measure of a long random orbit.

``cross_validate`` compares the two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .dynamics import MapSpec, _solve_lift, apply
from .errors import NonConvergenceError, UsageError
from .measures import (
    EmpiricalMeasure,
    GridMeasure,
    LebesgueMeasure,
    Observable,
    dictionary_gap,
    empirical_from_sequence,
    standard_dictionary,
    wasserstein1_circle,
)
from .noise import NoiseKernel, orbit_stream, random_orbit

__all__ = [
    "UlamOperator",
    "StationaryResult",
    "build_ulam",
    "ulam_warnings",
    "stationary_distribution",
    "monte_carlo_stationary",
    "CrossValidation",
    "cross_validate",
    "reference_measure",
    "error_budget",
]

MIN_CELLS = 16
ENTRIES_PER_CHUNK = 2_000_000


@dataclass
class UlamOperator:
    k: int
    dim: int
    matrix: sp.csr_matrix
    fmap: MapSpec
    kernel: NoiseKernel
    q: int
    warnings: list[str] = field(default_factory=list)

    @property
    def n_cells(self) -> int:
        return self.k**self.dim

    @property
    def cell_width(self) -> float:
        return 1.0 / self.k


class StationaryResult(NamedTuple):
    measure: GridMeasure
    residual: float
    iterations: int


def _quadrature_points(k: int, q: int, dim: int) -> np.ndarray:
    """Midpoints of a ``q``-per-axis subgrid in every cell, grouped by cell."""
    sub = (np.arange(q) + 0.5) / q
    c = (np.arange(k)[:, None] + sub) / k  # (k, q)
    if dim == 1:
        return c.reshape(-1)
    ix, iy, a, b = np.meshgrid(np.arange(k), np.arange(k), np.arange(q), np.arange(q), indexing="ij")
    return np.column_stack([c[ix, a].ravel(), c[iy, b].ravel()])


def ulam_warnings(kernel: NoiseKernel, k: int, q: int) -> list[str]:
    """Resolution warnings recorded in the operator metadata."""
    out = []
    if not kernel.degenerate and 1.0 / k >= kernel.epsilon:
        out.append(f"cell width 1/{k} is not below epsilon={kernel.epsilon:g}")
    if not kernel.degenerate and 1.0 / k >= 2.0 * kernel.epsilon and q < 2:
        out.append("cells wider than the noise ball with q=1 under-resolve the kernel")
    return out


def build_ulam(fmap: MapSpec, kernel: NoiseKernel, k: int, q: int = 4) -> UlamOperator:
    """Cell-to-cell transition matrix.

    Entry ``(i, j)`` averages ``P_eps(cell j | x)`` over the ``q`` (per axis)
    quadrature points ``x`` of cell ``i``. Uniform-ball probabilities are
    closed form (interval overlap on S^1, disk-rectangle area on T^2); the
    circle cosine bump uses its closed-form CDF and the torus cosine bump a
    tabulated cumulative mass function. ``epsilon = 0`` gives the classical
    Ulam matrix of the map.
    """
    if int(k) != k or k < MIN_CELLS:
        raise UsageError(f"Ulam cell count must be an integer >= {MIN_CELLS}, got {k}")
    if int(q) != q or q < 1:
        raise UsageError(f"quadrature count q must be a positive integer, got {q}")
    k, q = int(k), int(q)
    dim = fmap.space.dim
    warnings = ulam_warnings(kernel, k, q)
    if kernel.degenerate and dim == 1:
        return UlamOperator(k, dim, _exact_circle_ulam(fmap, k), fmap, kernel, q, warnings)
    x = _quadrature_points(k, q, dim)
    per_cell = q**dim
    n = k**dim
    span = 1 if kernel.degenerate else int(math.ceil(2.0 * kernel.epsilon * k)) + 3
    fan_out = span**dim
    cells_per_chunk = max(1, ENTRIES_PER_CHUNK // (fan_out * per_cell))
    blocks = []
    for c0 in range(0, n, cells_per_chunk):
        c1 = min(n, c0 + cells_per_chunk)
        xs = x[c0 * per_cell : c1 * per_cell]
        rows = np.arange(len(xs)) // per_cell
        y = apply(fmap, xs)
        if dim == 1:
            cols, vals, r = _circle_entries(kernel, y, k, rows)
        else:
            cols, vals, r = _torus_entries(kernel, y, k, rows)
        block = sp.coo_matrix((vals / per_cell, (r, cols)), shape=(c1 - c0, n)).tocsr()
        block.sum_duplicates()
        blocks.append(block)
    mat = sp.vstack(blocks, format="csr")
    mat.eliminate_zeros()
    return UlamOperator(k, dim, mat, fmap, kernel, q, warnings)


def _exact_circle_ulam(fmap: MapSpec, k: int) -> sp.csr_matrix:
    """Classical Ulam matrix ``|cell_i ∩ f^{-1}(cell_j)| / |cell_i|`` for a circle map.

    The lift is increasing, so ``f^{-1}`` of the image-cell edges are sorted
    points of [0, 1]; merging them with the source-cell edges splits [0, 1]
    into segments that each go from one cell into one cell.
    """
    deg = fmap.degree
    t = np.arange(deg * k + 1) / k
    if fmap.family == "linear":
        g = t / deg
    else:
        b = np.minimum(np.floor(t), deg - 1)
        g = _solve_lift(fmap.a, t, b / 2.0, (b + 1) / 2.0)
    g[0], g[-1] = 0.0, 1.0
    edges = np.unique(np.concatenate([np.arange(k + 1) / k, g]))
    mid = 0.5 * (edges[:-1] + edges[1:])
    length = np.diff(edges)
    rows = np.minimum((mid * k).astype(np.int64), k - 1)
    cols = (np.searchsorted(g, mid, side="right") - 1) % k
    mat = sp.coo_matrix((length * k, (rows, cols)), shape=(k, k)).tocsr()
    mat.sum_duplicates()
    return mat


def _circle_entries(kernel: NoiseKernel, y: np.ndarray, k: int, rows: np.ndarray):
    if kernel.degenerate:
        cols = np.minimum((y * k).astype(np.int64), k - 1)
        return cols, np.ones_like(y), rows
    e = kernel.epsilon
    first = np.floor((y - e) * k).astype(np.int64)
    span = int(math.ceil(2.0 * e * k)) + 2
    j = first[:, None] + np.arange(span)
    lo = j / k - y[:, None]
    p = kernel.cdf_1d(lo + 1.0 / k) - kernel.cdf_1d(lo)
    keep = p > 0
    return (j % k)[keep], p[keep], np.broadcast_to(rows[:, None], j.shape)[keep]


def _disk_quadrant(x: np.ndarray, y: np.ndarray, r: float) -> np.ndarray:
    """Area of ``{X <= x, Y <= y}`` inside the disk of radius ``r`` at the origin."""
    xb = np.clip(x, -r, r)

    def H(u):  # int_{-r}^{u} sqrt(r^2 - t^2) dt, u in [-r, r]
        s = np.sqrt(np.maximum(r * r - u * u, 0.0))
        return 0.5 * (u * s + r * r * np.arcsin(np.clip(u / r, -1.0, 1.0))) + 0.25 * math.pi * r * r

    ya = np.abs(y)
    t = np.sqrt(np.maximum(r * r - ya * ya, 0.0))
    Hx = H(xb)
    upper = H(np.minimum(xb, -t)) + ya * (np.clip(xb, -t, t) + t) + np.maximum(Hx - H(t), 0.0)
    q = Hx + upper
    return np.where(y >= 0, q, 2.0 * Hx - q)


@lru_cache(maxsize=4)
def _bump_table(n: int = 1024):
    """Cumulative mass of the unit-radius 2-D cosine bump on an ``(n+1)^2`` edge grid."""
    h = 2.0 / n
    c = -1.0 + (np.arange(n) + 0.5) * h
    r = np.hypot(c[:, None], c[None, :])
    dens = np.where(r <= 1.0, 1.0 + np.cos(np.pi * np.minimum(r, 1.0)), 0.0)
    mass = dens / dens.sum()
    table = np.zeros((n + 1, n + 1))
    table[1:, 1:] = mass.cumsum(0).cumsum(1)
    return table


def _bump_quadrant(x: np.ndarray, y: np.ndarray, eps: float) -> np.ndarray:
    table = _bump_table()
    n = table.shape[0] - 1
    u = (np.clip(x / eps, -1.0, 1.0) + 1.0) * (n / 2.0)
    v = (np.clip(y / eps, -1.0, 1.0) + 1.0) * (n / 2.0)
    i = np.minimum(u.astype(np.int64), n - 1)
    j = np.minimum(v.astype(np.int64), n - 1)
    fu, fv = u - i, v - j
    return (
        table[i, j] * (1 - fu) * (1 - fv)
        + table[i + 1, j] * fu * (1 - fv)
        + table[i, j + 1] * (1 - fu) * fv
        + table[i + 1, j + 1] * fu * fv
    )


def _torus_entries(kernel: NoiseKernel, y: np.ndarray, k: int, rows: np.ndarray):
    if kernel.degenerate:
        cells = np.minimum((y * k).astype(np.int64), k - 1)
        return cells[:, 0] * k + cells[:, 1], np.ones(len(y)), rows
    e = kernel.epsilon
    m = int(math.ceil(2.0 * e * k)) + 2
    fx = np.floor((y[:, 0] - e) * k).astype(np.int64)
    fy = np.floor((y[:, 1] - e) * k).astype(np.int64)
    off = np.arange(m + 1)
    X = ((fx[:, None] + off) / k - y[:, 0:1])[:, :, None]
    Y = ((fy[:, None] + off) / k - y[:, 1:2])[:, None, :]
    if kernel.shape == "uniform-ball":
        Q = _disk_quadrant(X, Y, e) / (math.pi * e * e)
    else:
        Q = _bump_quadrant(X, Y, e)
    p = Q[:, 1:, 1:] - Q[:, :-1, 1:] - Q[:, 1:, :-1] + Q[:, :-1, :-1]
    jx = (fx[:, None] + off[:-1]) % k
    jy = (fy[:, None] + off[:-1]) % k
    cols = jx[:, :, None] * k + jy[:, None, :]
    keep = p > 1e-300
    rr = np.broadcast_to(rows[:, None, None], p.shape)
    return cols[keep], p[keep], rr[keep]


def stationary_distribution(op: UlamOperator, tol: float = 1e-12, max_iter: int = 100_000) -> StationaryResult:
    """Left power iteration ``pi <- pi A`` from the uniform vector."""
    if not tol > 0:
        raise UsageError("tol must be positive")
    n = op.n_cells
    AT = op.matrix.T.tocsr()
    pi = np.full(n, 1.0 / n)
    for it in range(1, max_iter + 1):
        nxt = AT @ pi
        nxt /= nxt.sum()
        diff = float(np.abs(nxt - pi).sum())
        if diff <= tol:
            after = AT @ nxt
            after /= after.sum()
            res = float(np.abs(after - nxt).sum())
            if res <= tol:
                return StationaryResult(GridMeasure(op.dim, op.k, _clean(nxt)), res, it)
            return StationaryResult(GridMeasure(op.dim, op.k, _clean(pi)), diff, it)
        pi = nxt
    raise NonConvergenceError(
        f"power iteration did not reach tol={tol:g} in {max_iter} iterations (residual {diff:.3g})",
        last_iterate=pi,
        residual=diff,
    )


def _clean(pi: np.ndarray) -> np.ndarray:
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum()


def monte_carlo_stationary(fmap: MapSpec, kernel: NoiseKernel, x0, burn_in: int, n: int, rng) -> EmpiricalMeasure:
    """Empirical measure of ``x_{burn_in}, ..., x_{burn_in + n}`` along one random orbit."""
    if n < 1000:
        raise UsageError(f"Monte Carlo estimate needs n >= 1000 samples, got {n}")
    if burn_in < 0:
        raise UsageError("burn_in must be >= 0")
    pts = random_orbit(kernel, fmap, x0, burn_in + n, rng).points
    return empirical_from_sequence(pts[burn_in:])


def error_budget(k: int, n: int) -> float:
    """Combined W1 error allowance of a ``k``-cell Ulam and an ``n``-sample Monte Carlo estimate."""
    return 2.0 * (1.0 / k + 3.0 / math.sqrt(n))


@dataclass
class CrossValidation:
    ulam: StationaryResult
    seeds: list[int]
    w1: list[float]
    gap: list[float]
    budget: float

    @property
    def w1_median(self) -> float:
        return float(np.median(self.w1)) if self.w1 else float("nan")

    @property
    def gap_median(self) -> float:
        return float(np.median(self.gap))

    @property
    def agree(self) -> bool:
        if self.w1:
            return self.w1_median <= self.budget
        return self.gap_median <= self.budget

    def rows(self):
        for s, g, i in zip(self.seeds, self.gap, range(len(self.seeds))):
            yield s, (self.w1[i] if self.w1 else float("nan")), g


def cross_validate(
    fmap: MapSpec,
    kernel: NoiseKernel,
    k: int,
    n: int,
    seeds: int | Sequence[int],
    burn_in: int = 10_000,
    q: int = 4,
    master_seed: int = 0,
    dictionary: Sequence[Observable] | None = None,
    tol: float = 1e-12,
    ulam: StationaryResult | None = None,
) -> CrossValidation:
    """Compare the Ulam fixed point with Monte Carlo estimates, one per seed.

    Seed ``i`` uses ``orbit_stream(master_seed, i)``; its first draw is the
    initial point, so the report depends only on the arguments.
    """
    dim = fmap.space.dim
    if ulam is None:
        ulam = stationary_distribution(build_ulam(fmap, kernel, k, q), tol=tol)
    dictionary = list(dictionary) if dictionary is not None else standard_dictionary(dim)
    seed_list = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    w1, gap = [], []
    for s in seed_list:
        rng = orbit_stream(master_seed, s)
        x0 = rng.random() if dim == 1 else rng.random(2)
        mc = monte_carlo_stationary(fmap, kernel, x0, burn_in, n, rng)
        if dim == 1:
            w1.append(wasserstein1_circle(mc, ulam.measure))
        gap.append(dictionary_gap(mc, ulam.measure, dictionary).max_gap)
    return CrossValidation(ulam, seed_list, w1, gap, error_budget(k, n))


def reference_measure(fmap: MapSpec, k: int = 4096, q: int = 4, tol: float = 1e-12):
    """The physical measure: Lebesgue where it is invariant, else the ``epsilon = 0`` Ulam density."""
    if fmap.lebesgue_invariant:
        return LebesgueMeasure(fmap.space.dim)
    return stationary_distribution(build_ulam(fmap, NoiseKernel(0.0), k, q), tol=tol).measure
