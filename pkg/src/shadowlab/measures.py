"""Probability measures on S^1 / T^2, observables, and weak-* distances.

Three measure types share one ``integrate`` entry point:

* :class:`EmpiricalMeasure` - weighted atoms, e.g. the time average of an orbit
* :class:`GridMeasure` - cell masses on a uniform partition (Ulam densities)
* :class:`LebesgueMeasure` - normalized Lebesgue measure

Observables are real trigonometric polynomials, which makes their Lipschitz
constants explicit and their Lebesgue integrals exact.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import UsageError
from .phase_space import canonicalize

__all__ = [
    "Observable",
    "constant",
    "fourier",
    "trig_polynomial",
    "standard_dictionary",
    "EmpiricalMeasure",
    "GridMeasure",
    "LebesgueMeasure",
    "empirical_from_sequence",
    "integrate",
    "evaluate_all",
    "birkhoff_average",
    "wasserstein1_circle",
    "DictionaryGap",
    "dictionary_gap",
    "write_measure_csv",
    "read_empirical_csv",
    "read_grid_csv",
]

TWO_PI = 2.0 * math.pi
MASS_TOL = 1e-12


@dataclass(frozen=True)
class Observable:
    """``const + sum_t a_t cos(2 pi k_t . x) + b_t sin(2 pi k_t . x)``.

    ``terms`` holds ``(k, a, b)`` with ``k`` an integer tuple of length ``dim``
    and ``k != 0``.
    """

    dim: int
    const: float
    terms: tuple
    name: str = "phi"

    def __post_init__(self):
        folded = self.const
        kept = []
        for k, a, b in self.terms:
            k = tuple(int(v) for v in k)
            if len(k) != self.dim:
                raise UsageError(f"frequency {k} does not match dim={self.dim}")
            if not any(k):
                folded += a
            elif a or b:
                kept.append((k, float(a), float(b)))
        object.__setattr__(self, "const", float(folded))
        object.__setattr__(self, "terms", tuple(kept))

    def __call__(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        if self.dim == 2 and x.shape[-1:] != (2,):
            raise UsageError(f"observable {self.name} lives on T^2, got shape {x.shape}")
        if self.dim == 1 and x.ndim and x.shape[-1:] == (2,) and x.ndim > 1:
            raise UsageError(f"observable {self.name} lives on S^1, got shape {x.shape}")
        out = np.full(x.shape[:-1] if self.dim == 2 else x.shape, self.const)
        for k, a, b in self.terms:
            phase = TWO_PI * (x * k[0] if self.dim == 1 else x @ np.asarray(k, dtype=float))
            if a:
                out = out + a * np.cos(phase)
            if b:
                out = out + b * np.sin(phase)
        return out

    @property
    def sup_bound(self) -> float:
        return abs(self.const) + sum(abs(a) + abs(b) for _, a, b in self.terms)

    @property
    def lip_const(self) -> float:
        return sum(TWO_PI * math.hypot(*k) * (abs(a) + abs(b)) for k, a, b in self.terms)

    @property
    def lebesgue_integral(self) -> float:
        return self.const


def constant(dim: int = 1, value: float = 1.0) -> Observable:
    return Observable(dim, value, (), name="1" if value == 1.0 else f"{value:g}")


def fourier(k: int, kind: str = "cos", dim: int = 1) -> Observable:
    """``cos(2 pi k x)`` or ``sin(2 pi k x)`` on the circle."""
    if dim != 1:
        raise UsageError("fourier() builds circle observables; use standard_dictionary for T^2")
    if kind not in ("cos", "sin"):
        raise UsageError("kind must be 'cos' or 'sin'")
    a, b = (1.0, 0.0) if kind == "cos" else (0.0, 1.0)
    return Observable(1, 0.0, (((k,), a, b),), name=f"{kind}(2pi*{k}x)")


def trig_polynomial(a: Sequence[float], b: Sequence[float] = (), const: float = 0.0, name: str = "phi") -> Observable:
    """Circle polynomial with ``a[k-1]`` on ``cos(2 pi k x)`` and ``b[k-1]`` on ``sin``."""
    n = max(len(a), len(b))
    a = list(a) + [0.0] * (n - len(a))
    b = list(b) + [0.0] * (n - len(b))
    return Observable(1, const, tuple(((k + 1,), a[k], b[k]) for k in range(n)), name=name)


def _torus_product(k1: int, f1: str, k2: int, f2: str) -> Observable:
    # product-to-sum identities for f1(2 pi k1 x) * f2(2 pi k2 y)
    plus, minus = (k1, k2), (k1, -k2)
    if k2 == 0:
        terms = (((k1, 0), 1.0, 0.0),) if f1 == "cos" else (((k1, 0), 0.0, 1.0),)
        return Observable(2, 0.0, terms, name=f"{f1}(2pi*{k1}x)")
    if k1 == 0:
        terms = (((0, k2), 1.0, 0.0),) if f2 == "cos" else (((0, k2), 0.0, 1.0),)
        return Observable(2, 0.0, terms, name=f"{f2}(2pi*{k2}y)")
    terms = {
        ("cos", "cos"): ((plus, 0.5, 0.0), (minus, 0.5, 0.0)),
        ("sin", "sin"): ((plus, -0.5, 0.0), (minus, 0.5, 0.0)),
        ("sin", "cos"): ((plus, 0.0, 0.5), (minus, 0.0, 0.5)),
        ("cos", "sin"): ((plus, 0.0, 0.5), (minus, 0.0, -0.5)),
    }[(f1, f2)]
    return Observable(2, 0.0, terms, name=f"{f1}(2pi*{k1}x)*{f2}(2pi*{k2}y)")


def standard_dictionary(dim: int = 1, max_k: int | None = None, include_constant: bool = True) -> list[Observable]:
    """``{1} + {cos, sin}(2 pi k x), k <= 8`` on S^1; tensor products with ``k <= 4`` on T^2."""
    out = [constant(dim)] if include_constant else []
    if dim == 1:
        for k in range(1, (8 if max_k is None else max_k) + 1):
            out += [fourier(k, "cos"), fourier(k, "sin")]
        return out
    kmax = 4 if max_k is None else max_k
    for k1, k2 in itertools.product(range(kmax + 1), repeat=2):
        if k1 == 0 and k2 == 0:
            continue
        f1s = ("cos", "sin") if k1 else ("cos",)
        f2s = ("cos", "sin") if k2 else ("cos",)
        for f1, f2 in itertools.product(f1s, f2s):
            out.append(_torus_product(k1, f1, k2, f2))
    return out


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = canonicalize(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if len(pts) == 0 or len(w) != len(pts):
            raise UsageError("an empirical measure needs matching, nonempty points and weights")
        if np.any(w <= 0):
            raise UsageError("atom weights must be positive")
        if abs(w.sum() - 1.0) > MASS_TOL:
            raise UsageError(f"atom weights sum to {w.sum():.17g}, not 1")
        object.__setattr__(self, "points", np.atleast_1d(pts))
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return 1 if self.points.ndim == 1 else 2

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Masses of the ``k**dim`` cells of the uniform partition.

    On T^2 the cell ``(ix, iy)`` has flat index ``ix * k + iy``.
    """

    dim: int
    k: int
    masses: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float).ravel()
        if m.size != self.k**self.dim:
            raise UsageError(f"expected {self.k ** self.dim} cell masses, got {m.size}")
        if np.any(m < 0):
            raise UsageError("cell masses must be nonnegative")
        if abs(m.sum() - 1.0) > MASS_TOL:
            raise UsageError(f"cell masses sum to {m.sum():.17g}, not 1")
        object.__setattr__(self, "masses", m)

    @classmethod
    def uniform(cls, dim: int, k: int) -> "GridMeasure":
        return cls(dim, k, np.full(k**dim, 1.0 / k**dim))

    @property
    def density(self) -> np.ndarray:
        return self.masses * self.k**self.dim

    def centers(self) -> np.ndarray:
        c = (np.arange(self.k) + 0.5) / self.k
        if self.dim == 1:
            return c
        cx, cy = np.meshgrid(c, c, indexing="ij")
        return np.column_stack([cx.ravel(), cy.ravel()])


@dataclass(frozen=True)
class LebesgueMeasure:
    dim: int = 1


Measure = Union[EmpiricalMeasure, GridMeasure, LebesgueMeasure]


def empirical_from_sequence(seq) -> EmpiricalMeasure:
    """``S_n = (1/(n+1)) sum_j delta_{x_j}`` for a sequence of ``n+1`` points."""
    pts = np.asarray(seq, dtype=float)
    if pts.ndim == 0:
        pts = pts[None]
    if len(pts) == 0:
        raise UsageError("cannot build an empirical measure from an empty sequence")
    return EmpiricalMeasure(pts, np.full(len(pts), 1.0 / len(pts)))


def evaluate_all(dictionary: Sequence[Observable], points) -> np.ndarray:
    """All observables at once, shape ``(len(dictionary), n_points)``.

    Each distinct frequency is evaluated once and shared across observables.
    """
    x = np.asarray(points, dtype=float)
    dim = dictionary[0].dim if dictionary else 1
    if any(phi.dim != dim for phi in dictionary):
        raise UsageError("dictionary mixes observables of different dimensions")
    shape = x.shape[:-1] if dim == 2 else x.shape
    waves = {}
    out = np.empty((len(dictionary),) + shape)
    for i, phi in enumerate(dictionary):
        acc = np.full(shape, phi.const)
        for k, a, b in phi.terms:
            if k not in waves:
                phase = TWO_PI * (x * k[0] if dim == 1 else x @ np.asarray(k, dtype=float))
                waves[k] = (np.cos(phase), np.sin(phase))
            c, sn = waves[k]
            if a:
                acc += a * c
            if b:
                acc += b * sn
        out[i] = acc
    return out


def _check_dim(measure: Measure, phi: Observable):
    if measure.dim != phi.dim:
        raise UsageError(f"measure lives in dim {measure.dim}, observable {phi.name} in dim {phi.dim}")


def integrate(measure: Measure, phi: Observable) -> float:
    _check_dim(measure, phi)
    if isinstance(measure, LebesgueMeasure):
        return phi.lebesgue_integral
    if isinstance(measure, GridMeasure):
        return float(measure.masses @ phi(measure.centers()))
    return float(measure.weights @ phi(measure.points))


def birkhoff_average(fmap, z0, n: int, phi: Observable) -> float:
    """``(1/(n+1)) sum_{j<=n} phi(f^j(z0))`` along the double-precision orbit."""
    from .dynamics import orbit

    return integrate(empirical_from_sequence(orbit(fmap, z0, n)), phi)


# ---------------------------------------------------------------------------
# Wasserstein-1 on the circle


def _circle_parts(m: Measure):
    if m.dim != 1:
        raise UsageError("wasserstein1_circle needs measures on S^1")
    if isinstance(m, LebesgueMeasure):
        return None, None, np.array([0.0, 1.0]), np.array([0.0, 1.0])
    if isinstance(m, GridMeasure):
        edges = np.arange(m.k + 1) / m.k
        cum = np.concatenate([[0.0], np.cumsum(m.masses)])
        cum[-1] = 1.0
        return None, None, edges, cum
    order = np.argsort(m.points, kind="stable")
    pos = m.points[order]
    return pos, np.cumsum(m.weights[order]), None, None


def _cdf(parts, t: np.ndarray, right_end: bool = False) -> np.ndarray:
    """CDF at ``t``; atoms at ``t`` are included unless ``right_end`` (left limit)."""
    pos, cumw, edges, cum = parts
    if pos is not None:
        idx = np.searchsorted(pos, t, side="left" if right_end else "right")
        return np.concatenate([[0.0], cumw])[idx]
    return np.interp(t, edges, cum)


def _median_level(lo: np.ndarray, hi: np.ndarray, length: np.ndarray) -> float:
    """Median of a piecewise-linear function under Lebesgue measure.

    Segment ``i`` runs linearly from ``lo[i]`` to ``hi[i]`` over ``length[i]``.
    The distribution function of the values is swept through its sorted
    change points.
    """
    m = np.minimum(lo, hi)
    M = np.maximum(lo, hi)
    flat = (M - m) <= 1e-15
    slope = np.where(flat, 0.0, length / np.where(flat, 1.0, M - m))
    vals = np.concatenate([m[flat], m[~flat], M[~flat]])
    jumps = np.concatenate([length[flat], np.zeros(2 * (~flat).sum())])
    dslope = np.concatenate([np.zeros(flat.sum()), slope[~flat], -slope[~flat]])
    order = np.argsort(vals, kind="stable")
    vals, jumps, dslope = vals[order], jumps[order], dslope[order]
    slope_after = np.cumsum(dslope)
    gaps = np.diff(vals)
    ramp = np.concatenate([[0.0], np.cumsum(slope_after[:-1] * gaps)])
    phi_right = np.cumsum(jumps) + ramp
    half = 0.5 * length.sum()
    e = int(np.searchsorted(phi_right, half, side="left"))
    e = min(e, len(vals) - 1)
    if e == 0:
        return float(vals[0])
    left_limit = phi_right[e - 1] + slope_after[e - 1] * gaps[e - 1]
    if left_limit >= half and slope_after[e - 1] > 0:
        return float(vals[e - 1] + (half - phi_right[e - 1]) / slope_after[e - 1])
    return float(vals[e])


def _abs_integral(lo, hi, length, c) -> float:
    p, q = lo - c, hi - c
    same = p * q >= 0
    denom = np.where(same, 1.0, np.abs(q - p))
    crossing = (p * p + q * q) / (2.0 * denom)
    return float(np.sum(length * np.where(same, np.abs(0.5 * (p + q)), crossing)))


def wasserstein1_circle(mu: Measure, nu: Measure) -> float:
    """Exact W1 on the circle: ``min_c int_0^1 |F_mu - F_nu - c| dt``.

    Grid measures are read as piecewise-constant densities, so the CDF
    difference is piecewise linear between the merged breakpoints.
    """
    pm, pn = _circle_parts(mu), _circle_parts(nu)
    pieces = [np.array([0.0, 1.0])]
    for pos, _, edges, _ in (pm, pn):
        pieces.append(pos if pos is not None else edges)
    B = np.unique(np.concatenate(pieces))
    left, right = B[:-1], B[1:]
    length = right - left
    lo = _cdf(pm, left) - _cdf(pn, left)
    hi = _cdf(pm, right, right_end=True) - _cdf(pn, right, right_end=True)
    keep = length > 0
    lo, hi, length = lo[keep], hi[keep], length[keep]
    c = _median_level(lo, hi, length)
    return max(_abs_integral(lo, hi, length, c), 0.0)


class DictionaryGap(NamedTuple):
    max_gap: float
    per_observable: list
    raw: list


def dictionary_gap(mu: Measure, nu: Measure, dictionary: Sequence[Observable]) -> DictionaryGap:
    """Per-observable ``|int phi dmu - int phi dnu| / (lip_const + 1)`` and their maximum."""
    if not dictionary:
        raise UsageError("dictionary must be nonempty")
    raw = [abs(integrate(mu, phi) - integrate(nu, phi)) for phi in dictionary]
    norm = [g / (phi.lip_const + 1.0) for g, phi in zip(raw, dictionary)]
    return DictionaryGap(max(norm), norm, raw)


# ---------------------------------------------------------------------------
# CSV serialization


def _fmt(x: float) -> str:
    return repr(float(x))


def write_measure_csv(path, measure: Measure) -> None:
    """Atoms as ``x[,y],weight`` rows; grid measures as ``cell_index,mass`` rows."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(measure, GridMeasure):
            w.writerow(["cell_index", "mass"])
            for i, m in enumerate(measure.masses):
                w.writerow([i, _fmt(m)])
        elif isinstance(measure, EmpiricalMeasure):
            pts = measure.points.reshape(len(measure), -1)
            w.writerow(["x", "weight"] if pts.shape[1] == 1 else ["x", "y", "weight"])
            for p, wt in zip(pts, measure.weights):
                w.writerow([*(_fmt(v) for v in p), _fmt(wt)])
        else:
            raise UsageError("only empirical and grid measures are serialized")


def read_empirical_csv(path) -> EmpiricalMeasure:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[-1] != "weight" or len(header) not in (2, 3):
        raise UsageError(f"{path}: expected header x[,y],weight")
    data = np.array(body, dtype=float)
    pts = data[:, 0] if len(header) == 2 else data[:, :2]
    return EmpiricalMeasure(pts, data[:, -1])


def read_grid_csv(path, dim: int = 1) -> GridMeasure:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["cell_index", "mass"]:
        raise UsageError(f"{path}: expected header cell_index,mass")
    data = np.array(rows[1:], dtype=float)
    n = len(data)
    k = n if dim == 1 else int(round(math.sqrt(n)))
    if k**dim != n:
        raise UsageError(f"{path}: {n} cells is not a {dim}-dimensional square grid")
    masses = np.zeros(n)
    masses[data[:, 0].astype(int)] = data[:, 1]
    return GridMeasure(dim, k, masses)
