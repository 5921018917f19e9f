"""Experiment drivers: shadowing demo, epsilon sweep, Birkhoff scaling.

Every driver is a pure function of an :class:`ExperimentConfig`; random
orbit ``i`` always draws from ``orbit_stream(config.seed, i)``, so reports are
reproducible bit for bit. Results come back as :class:`Table` objects that
serialize to CSV with ``repr`` floats.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ExperimentConfig
from .dynamics import typical_orbit
from .errors import ExperimentError, ShadowlabError
from .measures import LebesgueMeasure, evaluate_all, integrate, standard_dictionary, wasserstein1_circle
from .noise import NoiseKernel, orbit_stream, random_orbit, verify_pseudo_orbit
from .shadowing import certify, shadow_many, shadowing_modulus
from .stationary import (
    build_ulam,
    cross_validate,
    reference_measure,
    stationary_distribution,
    ulam_warnings,
)

__all__ = [
    "Table",
    "ShadowDemoReport",
    "SweepReport",
    "BirkhoffReport",
    "AVERAGE_TOL",
    "BOUND_SLACK",
    "INTERIOR_MARGIN",
    "initial_point",
    "simulate",
    "run_shadow_demo",
    "run_stationary",
    "run_sweep",
    "run_birkhoff",
]

AVERAGE_TOL = 1e-9
BOUND_SLACK = 1e-6
CERT_TOL = 1e-9
INTERIOR_MARGIN = 20
SLOPE_RANGE = (-0.65, -0.35)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values for {len(self.columns)} columns")
        self.rows.append(list(values))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def write_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_cell(v) for v in r])


def initial_point(rng: np.random.Generator, dim: int):
    """First draw of an orbit stream: a uniform point of the phase space."""
    return rng.random() if dim == 1 else rng.random(2)


def _coord_names(dim: int) -> list[str]:
    return ["x"] if dim == 1 else ["x", "y"]


def _orbits(cfg: ExperimentConfig, kernel: NoiseKernel):
    fmap = cfg.fmap
    for i in range(cfg.orbits):
        rng = orbit_stream(cfg.seed, i)
        x0 = initial_point(rng, cfg.dim)
        yield i, random_orbit(kernel, fmap, x0, cfg.n, rng).points


def simulate(cfg: ExperimentConfig) -> Table:
    """Random orbits of the perturbed chain, one row per point."""
    table = Table(["epsilon", "orbit", "j"] + _coord_names(cfg.dim))
    for eps in cfg.epsilons:
        for i, pts in _orbits(cfg, NoiseKernel(eps, cfg.shape)):
            pts = pts.reshape(len(pts), -1)
            for j, p in enumerate(pts.tolist()):
                table.add(eps, i, j, *p)
    return table


@dataclass
class ShadowDemoReport:
    orbits: Table
    observables: Table

    @property
    def averages_ok(self) -> bool:
        return all(self.observables.column("ok"))

    @property
    def certified(self) -> bool:
        return all(self.orbits.column("certified"))


def run_shadow_demo(cfg: ExperimentConfig, epsilons: Sequence[float] | None = None) -> ShadowDemoReport:
    """Shadow random orbits and check the time-average inequality per observable.

    For every orbit ``x`` (a pseudo-orbit with gap ``<= eps``) and its shadow
    ``z``, each dictionary observable gets
    ``lhs = |mean phi(z_j) - mean phi(x_j)|`` and
    ``rhs = lip(phi) * shadow_distance``. ``epsilons`` overrides the config
    list and may contain 0 (the deterministic chain).
    """
    fmap = cfg.fmap
    modulus = shadowing_modulus(fmap)
    dictionary = standard_dictionary(cfg.dim, cfg.max_k)
    eps_list = cfg.epsilons if epsilons is None else tuple(float(e) for e in epsilons)
    orbit_t = Table(
        [
            "epsilon",
            "orbit",
            "max_gap",
            "pseudo_orbit_ok",
            "shadow_distance",
            "interior_distance",
            "target",
            "consistency",
            "certified",
            "worst_average_margin",
        ]
    )
    obs_t = Table(["epsilon", "orbit", "observable", "lip", "lhs", "rhs", "ok"])
    failures = []
    for eps in eps_list:
        kernel = NoiseKernel(eps, cfg.shape)
        pseudos = [pts for _, pts in _orbits(cfg, kernel)]
        shadows = shadow_many(fmap, pseudos)
        target = modulus.accuracy(eps) + CERT_TOL
        for i, (x, sh) in enumerate(zip(pseudos, shadows)):
            check = verify_pseudo_orbit(fmap, x, eps)
            cert = certify(fmap, x, sh, target)
            interior = sh.deviation[: max(1, len(x) - INTERIOR_MARGIN)].max()
            worst = -math.inf
            mz = evaluate_all(dictionary, sh.points).mean(axis=1)
            mx = evaluate_all(dictionary, x).mean(axis=1)
            for phi, a, b in zip(dictionary, mz.tolist(), mx.tolist()):
                lhs = abs(a - b)
                rhs = phi.lip_const * cert.shadow_distance
                worst = max(worst, lhs - rhs)
                obs_t.add(eps, i, phi.name, phi.lip_const, lhs, rhs, lhs <= rhs + AVERAGE_TOL)
            orbit_t.add(
                eps,
                i,
                check.max_gap,
                check.valid,
                cert.shadow_distance,
                float(interior),
                target,
                cert.consistency,
                cert.passed,
                worst,
            )
            if not cert.passed:
                failures.append((eps, i))
    report = ShadowDemoReport(orbit_t, obs_t)
    if failures:
        raise ExperimentError(
            f"shadowing certificate failed for {len(failures)} orbit(s), first (epsilon, orbit) = {failures[0]}",
            artifacts={"orbits": orbit_t, "observables": obs_t},
        )
    return report


@dataclass
class StationaryReport:
    summary: Table
    density: Table
    seeds: Table


def run_stationary(cfg: ExperimentConfig) -> StationaryReport:
    """Ulam fixed point and its Monte Carlo cross-check for every epsilon."""
    fmap = cfg.fmap
    dictionary = standard_dictionary(cfg.dim, cfg.max_k)
    summary = Table(
        ["epsilon", "cells", "residual", "iterations", "w1_median", "gap_median", "budget", "agree", "warnings"]
    )
    density = Table(["epsilon", "cell_index", "mass"])
    seeds = Table(["epsilon", "seed", "w1", "gap"])
    for eps in cfg.epsilons:
        kernel = NoiseKernel(eps, cfg.shape)
        cv = cross_validate(
            fmap,
            kernel,
            cfg.ulam_k,
            cfg.n,
            cfg.seeds,
            burn_in=cfg.burn_in,
            q=cfg.ulam_q,
            master_seed=cfg.seed,
            dictionary=dictionary,
        )
        res = cv.ulam
        summary.add(
            eps,
            res.measure.masses.size,
            res.residual,
            res.iterations,
            cv.w1_median,
            cv.gap_median,
            cv.budget,
            cv.agree,
            "; ".join(ulam_warnings(kernel, cfg.ulam_k, cfg.ulam_q)),
        )
        for idx, m in enumerate(res.measure.masses.tolist()):
            density.add(eps, idx, m)
        for s, w, g in cv.rows():
            seeds.add(eps, s, w, g)
    return StationaryReport(summary, density, seeds)


@dataclass
class SweepReport:
    rows: Table
    observables: Table

    @property
    def bound_ok(self) -> bool:
        return all(self.rows.column("bound_ok"))

    @property
    def w1(self) -> list[float]:
        return self.rows.column("w1")


SWEEP_COLUMNS = [
    "epsilon",
    "delta",
    "w1",
    "w1_mc_check",
    "mc_budget",
    "mc_agree",
    "max_norm_gap",
    "max_excess",
    "bound_ok",
    "seeds",
]


def run_sweep(cfg: ExperimentConfig) -> SweepReport:
    """Distance from the stationary measure to the physical measure as epsilon shrinks.

    For each epsilon the Ulam estimate ``mu_eps`` (cross-checked by Monte
    Carlo) is compared with the reference ``mu`` (Lebesgue, or the
    ``epsilon = 0`` Ulam density at the same grid). Each observable must obey
    ``|int phi dmu_eps - int phi dmu| <= (lip + 1) eps + delta(eps) + slack``
    with ``slack = 1e-6 + lip * budget``, where ``budget`` is the combined
    Ulam/Monte Carlo W1 error allowance. ``max_excess`` is the largest
    ``gap - bound - slack``, so ``bound_ok`` is ``max_excess <= 0``.

    If a component fails, the exception carries the rows finished so far in
    its ``partial`` attribute.
    """
    fmap = cfg.fmap
    modulus = shadowing_modulus(fmap)
    dictionary = standard_dictionary(cfg.dim, cfg.max_k)
    rows = Table(list(SWEEP_COLUMNS))
    obs = Table(["epsilon", "observable", "lip", "gap", "bound", "slack", "ok"])
    try:
        ref = reference_measure(fmap, cfg.ulam_k, cfg.ulam_q)
        ref_int = [integrate(ref, phi) for phi in dictionary]
        for eps in cfg.epsilons:
            cv = cross_validate(
                fmap,
                NoiseKernel(eps, cfg.shape),
                cfg.ulam_k,
                cfg.n,
                cfg.seeds,
                burn_in=cfg.burn_in,
                q=cfg.ulam_q,
                master_seed=cfg.seed,
                dictionary=dictionary,
            )
            mu = cv.ulam.measure
            delta = modulus(eps)
            w1 = wasserstein1_circle(mu, ref) if cfg.dim == 1 else math.nan
            mc = cv.w1_median if cfg.dim == 1 else cv.gap_median
            excess, norm = [], []
            for phi, r in zip(dictionary, ref_int):
                gap = abs(integrate(mu, phi) - r)
                bound = (phi.lip_const + 1.0) * eps + delta
                slack = BOUND_SLACK + phi.lip_const * cv.budget
                excess.append(gap - bound - slack)
                norm.append(gap / (phi.lip_const + 1.0))
                obs.add(eps, phi.name, phi.lip_const, gap, bound, slack, gap <= bound + slack)
            worst = max(excess)
            rows.add(eps, delta, w1, mc, cv.budget, cv.agree, max(norm), worst, worst <= 0.0, cfg.seeds)
    except ShadowlabError as exc:
        exc.partial = SweepReport(rows, obs)
        raise
    return SweepReport(rows, obs)


@dataclass
class BirkhoffReport:
    gaps: Table
    summary: Table

    def slope(self, kind: str) -> float:
        for r in self.summary.rows:
            if r[0] == kind:
                return r[2]
        raise KeyError(kind)

    @property
    def slopes_ok(self) -> bool:
        return all(self.summary.column("slope_ok"))


def _fit_slope(ns: np.ndarray, gaps: np.ndarray) -> float:
    good = gaps > 0
    if good.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(ns[good]), np.log(gaps[good]), 1)[0])


def _n0(ns: np.ndarray, med: np.ndarray, eps: float) -> int:
    """Smallest scheduled ``n`` after which the median gap stays ``<= eps``; -1 if never."""
    bad = np.flatnonzero(med > eps)
    if len(bad) == 0:
        return int(ns[0])
    if bad[-1] == len(ns) - 1:
        return -1
    return int(ns[bad[-1] + 1])


def run_birkhoff(cfg: ExperimentConfig) -> BirkhoffReport:
    """Birkhoff-average error versus orbit length for deterministic and random orbits.

    Deterministic orbits start at Lebesgue-random points and are compared with
    the physical measure; random orbits (noise level ``epsilons[0]``) are
    compared with the Ulam estimate of their stationary measure. The gap of a
    seed at length ``n`` is ``|(1/(n+1)) sum_{j<=n} phi(x_j) - int phi dmu|``.
    ``rms_gap`` pools seeds and non-constant observables; the log-log slope is
    fitted to it. Uses dictionary frequencies up to ``max_k`` (default 3).
    """
    fmap = cfg.fmap
    dim = cfg.dim
    dictionary = [
        phi for phi in standard_dictionary(dim, cfg.max_k or 3, include_constant=False)
    ]
    lo, hi = cfg.birkhoff_log2
    ns = 2 ** np.arange(lo, hi + 1)
    N = int(ns[-1])
    eps = cfg.epsilons[0]
    kernel = NoiseKernel(eps, cfg.shape)
    phys = reference_measure(fmap, cfg.ulam_k, cfg.ulam_q)
    if fmap.lebesgue_invariant:
        stat = LebesgueMeasure(dim)
    else:
        stat = stationary_distribution(build_ulam(fmap, kernel, cfg.ulam_k, cfg.ulam_q)).measure

    def gaps_for(points, measure):
        targets = np.array([integrate(measure, phi) for phi in dictionary])
        vals = evaluate_all(dictionary, points)
        cs = np.cumsum(vals, axis=1)
        return np.abs(cs[:, ns] / (ns + 1.0) - targets[:, None])  # (obs, len(ns))

    gaps = Table(["kind", "n", "rms_gap", "median_gap", "max_gap"])
    summary = Table(["kind", "epsilon", "slope", "slope_ok", "n0"])
    for kind in ("deterministic", "random"):
        per_seed = []
        for s in range(cfg.seeds):
            if kind == "deterministic":
                pts = typical_orbit(fmap, N, orbit_stream(cfg.seed, s))
                per_seed.append(gaps_for(pts, phys))
            else:
                rng = orbit_stream(cfg.seed, cfg.seeds + s)
                x0 = initial_point(rng, dim)
                pts = random_orbit(kernel, fmap, x0, cfg.burn_in + N, rng).points[cfg.burn_in :]
                per_seed.append(gaps_for(pts, stat))
        G = np.stack(per_seed)  # (seeds, obs, len(ns))
        rms = np.sqrt((G**2).mean(axis=(0, 1)))
        worst = G.max(axis=1)
        med = np.median(worst, axis=0)
        for n, r, m, w in zip(ns, rms, med, worst.max(axis=0)):
            gaps.add(kind, int(n), float(r), float(m), float(w))
        slope = _fit_slope(ns.astype(float), rms)
        ok = SLOPE_RANGE[0] <= slope <= SLOPE_RANGE[1]
        for e in cfg.epsilons:
            summary.add(kind, e, slope, ok, _n0(ns, med, e))
    return BirkhoffReport(gaps, summary)
