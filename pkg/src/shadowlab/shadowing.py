"""Finite-horizon shadowing of pseudo-orbits by true orbits.

Expanding circle maps are shadowed by pulling the last pseudo-orbit point
back along the nearest inverse branches. Inverse branches contract by
``1/lam``, so the deviation at index ``j`` is at most
``delta * sum_{k=1}^{n-j} lam^{-k} < delta / (lam - 1)``.

The cat map is shadowed by a linear correction ``z_j = x_j + e_j`` with
``e_{j+1} = A e_j + r_j``, where ``r_j`` is the lifted defect
``f(x_j) - x_{j+1}``. The stable part of ``e`` is summed forward from
``e_0``, the unstable part backward from ``e_n``, both as truncated geometric
series.

Shadow orbits are returned as whole sequences. Iterating ``z_0`` forward in
floating point would drift away from the orbit exponentially fast, so the
sequence itself is the object, and ``consistency`` certifies it is an orbit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.signal import lfilter

from .dynamics import MapSpec, apply, cat_eigensystem, nearest_preimages
from .errors import UsageError
from .noise import pseudo_orbit_gaps
from .phase_space import canonicalize, dist, wrap

__all__ = [
    "CONSISTENCY_TOL",
    "ShadowOrbit",
    "Certificate",
    "ShadowingModulus",
    "shadow_expanding",
    "shadow_cat_map",
    "shadow",
    "shadow_many",
    "cat_corrections",
    "cat_constant",
    "certify",
    "shadowing_modulus",
    "read_pseudo_orbit",
    "write_pseudo_orbit",
]

CONSISTENCY_TOL = 1e-10


@dataclass
class ShadowOrbit:
    points: np.ndarray
    deviation: np.ndarray
    shadow_distance: float
    consistency: float
    max_gap: float
    branch_itinerary: np.ndarray | None = None
    degraded: bool = False
    notes: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.points)


class Certificate(NamedTuple):
    shadow_distance: float
    consistency: float
    epsilon: float
    passed: bool


def _consistency(fmap: MapSpec, z: np.ndarray) -> np.ndarray:
    if len(z) < 2:
        return np.zeros(0)
    return dist(fmap.space, apply(fmap, z[:-1]), z[1:])


def _finish(fmap, x, z, max_gap, itinerary=None, ties=None) -> ShadowOrbit:
    dev = dist(fmap.space, z, x)
    cons = _consistency(fmap, z)
    degraded = bool(ties is not None and np.any(ties))
    notes = []
    if degraded:
        notes.append(f"equidistant preimages at indices {np.flatnonzero(ties).tolist()[:10]}")
    return ShadowOrbit(
        points=z,
        deviation=dev,
        shadow_distance=float(dev.max()),
        consistency=float(cons.max()) if len(cons) else 0.0,
        max_gap=max_gap,
        branch_itinerary=itinerary,
        degraded=degraded,
        notes=notes,
    )


def _pullback(fmap: MapSpec, X: np.ndarray):
    """Nearest-branch pullback for a batch of pseudo-orbits, shape ``(lanes, n+1)``."""
    lanes, length = X.shape
    Z = np.empty_like(X)
    branches = np.zeros((lanes, length - 1), dtype=np.int64)
    ties = np.zeros((lanes, length - 1), dtype=bool)
    Z[:, -1] = X[:, -1]
    for j in range(length - 2, -1, -1):
        Z[:, j], branches[:, j], ties[:, j] = nearest_preimages(fmap, Z[:, j + 1], X[:, j])
    return Z, branches, ties


def _check_expanding(fmap: MapSpec, x: np.ndarray, strict: bool) -> float:
    if not fmap.is_expanding:
        raise UsageError("shadow_expanding needs a circle-expanding map")
    if x.ndim != 1 or len(x) < 1:
        raise UsageError("expected a nonempty circle sequence")
    max_gap = float(pseudo_orbit_gaps(fmap, x).max()) if len(x) > 1 else 0.0
    if strict and max_gap / (fmap.lam - 1.0) >= 0.25 / fmap.degree:
        raise UsageError(
            f"pseudo-orbit gap {max_gap:.3g} too large: branch choice is ambiguous once "
            f"gap/(lam-1) >= {0.25 / fmap.degree:.3g}"
        )
    return max_gap


def shadow_expanding(fmap: MapSpec, pseudo, strict: bool = True) -> ShadowOrbit:
    """Shadow a pseudo-orbit of an expanding circle map, with ``z_n = x_n``.

    With ``strict=False`` the gap precondition is skipped; the result is
    still a true orbit, only the distance guarantee is lost.
    """
    if not fmap.is_expanding:
        raise UsageError("shadow_expanding needs a circle-expanding map")
    x = canonicalize(np.asarray(pseudo, dtype=float))
    return shadow_many(fmap, [x], strict=strict)[0]


def shadow_many(fmap: MapSpec, pseudos, strict: bool = True) -> list[ShadowOrbit]:
    """Shadow several pseudo-orbits; equal-length circle orbits are pulled back together."""
    pseudos = [canonicalize(np.asarray(p, dtype=float)) for p in pseudos]
    if not fmap.is_expanding:
        return [shadow_cat_map(fmap, p, strict=strict) for p in pseudos]
    gaps = [_check_expanding(fmap, x, strict) for x in pseudos]
    out: list[ShadowOrbit | None] = [None] * len(pseudos)
    by_length: dict[int, list[int]] = {}
    for i, x in enumerate(pseudos):
        by_length.setdefault(len(x), []).append(i)
    for idx in by_length.values():
        X = np.stack([pseudos[i] for i in idx])
        Z, branches, ties = _pullback(fmap, X)
        for lane, i in enumerate(idx):
            out[i] = _finish(fmap, X[lane], Z[lane], gaps[i], branches[lane], ties[lane])
    return out


def shadow(fmap: MapSpec, pseudo, strict: bool = True) -> ShadowOrbit:
    if fmap.is_expanding:
        return shadow_expanding(fmap, pseudo, strict=strict)
    return shadow_cat_map(fmap, pseudo, strict=strict)


def cat_constant() -> float:
    """``C_A = (1/(lam_u - 1) + 1/(1 - lam_s)) * kappa`` computed from the matrix."""
    lam_u, lam_s, _, kappa = cat_eigensystem()
    return (1.0 / (lam_u - 1.0) + 1.0 / (1.0 - lam_s)) * kappa


def cat_corrections(defects) -> np.ndarray:
    """Solve ``e_{j+1} = A e_j + r_j`` for ``j < n`` with bounded corrections.

    ``defects`` has shape ``(n, 2)``; the result has shape ``(n+1, 2)``. The
    stable coordinate starts at 0 at ``j = 0``, the unstable one is 0 at
    ``j = n``.
    """
    r = np.asarray(defects, dtype=float).reshape(-1, 2)
    lam_u, lam_s, V, _ = cat_eigensystem()
    rt = r @ np.linalg.inv(V).T
    n = len(r)
    s = np.zeros(n + 1)
    u = np.zeros(n + 1)
    if n:
        s[1:] = lfilter([1.0], [1.0, -lam_s], rt[:, 1])
        v = lfilter([1.0], [1.0, -1.0 / lam_u], -rt[::-1, 0] / lam_u)
        u[:-1] = v[::-1]
    return np.column_stack([u, s]) @ V.T


def shadow_cat_map(fmap: MapSpec, pseudo, strict: bool = True) -> ShadowOrbit:
    if fmap.family != "cat":
        raise UsageError("shadow_cat_map needs the cat map")
    x = canonicalize(np.asarray(pseudo, dtype=float))
    if x.ndim != 2 or x.shape[1] != 2 or len(x) < 1:
        raise UsageError("expected a nonempty torus sequence of shape (n+1, 2)")
    defects = wrap(apply(fmap, x[:-1]) - x[1:])
    max_gap = float(np.sqrt((defects**2).sum(axis=1)).max()) if len(defects) else 0.0
    if strict and np.abs(defects).max(initial=0.0) * cat_constant() >= 0.25:
        raise UsageError(f"defect {max_gap:.3g} too large for the linear corrector")
    e = cat_corrections(defects)
    return _finish(fmap, x, canonicalize(x + e), max_gap)


def certify(fmap: MapSpec, pseudo, shadow_orbit, epsilon: float) -> Certificate:
    """Recompute shadow distance and orbit consistency from scratch.

    Passes when the shadow stays strictly within ``epsilon`` of the pseudo
    orbit and is an orbit of ``fmap`` to ``CONSISTENCY_TOL``.
    """
    x = canonicalize(np.asarray(pseudo, dtype=float))
    z = shadow_orbit.points if isinstance(shadow_orbit, ShadowOrbit) else shadow_orbit
    z = canonicalize(np.asarray(z, dtype=float))
    if len(x) != len(z):
        raise UsageError(f"length mismatch: pseudo-orbit {len(x)} vs shadow {len(z)}")
    sd = float(dist(fmap.space, x, z).max())
    cons = _consistency(fmap, z)
    c = float(cons.max()) if len(cons) else 0.0
    return Certificate(sd, c, float(epsilon), sd < epsilon and c <= CONSISTENCY_TOL)


@dataclass(frozen=True)
class ShadowingModulus:
    """``delta(eps) = eps / constant``: delta-pseudo-orbits are eps-shadowed by the solvers."""

    family: str
    constant: float

    def __call__(self, epsilon):
        return epsilon / self.constant

    def accuracy(self, delta):
        """Shadowing accuracy guaranteed for a delta-pseudo-orbit (inverse of the modulus)."""
        return delta * self.constant


def shadowing_modulus(fmap: MapSpec) -> ShadowingModulus:
    if fmap.is_expanding:
        return ShadowingModulus(fmap.family, fmap.lam / (fmap.lam - 1.0))
    return ShadowingModulus(fmap.family, cat_constant())


def read_pseudo_orbit(path) -> np.ndarray:
    """Read a pseudo-orbit file: a ``dim=<1|2>`` header, then one comma-separated point per line.

    Blank lines and lines starting with ``#`` are skipped.
    """
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read pseudo-orbit file {path}: {exc.strerror}") from None
    lines = [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or not lines[0].replace(" ", "").startswith("dim="):
        raise UsageError(f"{path}: first line must be 'dim=1' or 'dim=2'")
    dim = lines[0].replace(" ", "")[4:]
    if dim not in ("1", "2"):
        raise UsageError(f"{path}: dim must be 1 or 2, got {dim!r}")
    dim = int(dim)
    pts = []
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            p = [float(v) for v in ln.split(",")]
        except ValueError:
            raise UsageError(f"{path}: line {lineno}: not a comma-separated list of numbers") from None
        if len(p) != dim:
            raise UsageError(f"{path}: line {lineno}: expected {dim} coordinate(s), got {len(p)}")
        pts.append(p)
    if not pts:
        raise UsageError(f"{path}: no points")
    arr = np.asarray(pts, dtype=float)
    return canonicalize(arr[:, 0] if dim == 1 else arr)


def write_pseudo_orbit(path, points) -> None:
    x = np.asarray(points, dtype=float)
    dim = 1 if x.ndim == 1 else x.shape[1]
    rows = x.reshape(len(x), -1).tolist()
    with open(path, "w") as fh:
        fh.write(f"dim={dim}\n")
        for r in rows:
            fh.write(",".join(repr(v) for v in r) + "\n")
