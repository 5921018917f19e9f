"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear even under
output capture) or directly with ``python tests/test_acceptance.py``.
"""
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import w1_assignment, w1_linprog
from shadowlab import cli
from shadowlab.config import load_config
from shadowlab.dynamics import cat_map, linear, nonlinear
from shadowlab.experiments import run_birkhoff, run_sweep
from shadowlab.measures import EmpiricalMeasure, empirical_from_sequence, evaluate_all, standard_dictionary, wasserstein1_circle
from shadowlab.noise import NoiseKernel, orbit_stream, random_orbit, verify_pseudo_orbit
from shadowlab.shadowing import CONSISTENCY_TOL, cat_constant, certify, shadow_many
from shadowlab.stationary import build_ulam, cross_validate, stationary_distribution

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
EPS = 1e-3
N = 10_000
ORBITS = 100
RESULTS = {}


def report(number, ok, detail, capsys):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    RESULTS[number] = ok
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    return ok


def _orbits(fmap, eps=EPS, n=N, count=ORBITS):
    out = []
    for i in range(count):
        rng = orbit_stream(2024, i)
        x0 = rng.random() if fmap.space.dim == 1 else rng.random(2)
        out.append(random_orbit(NoiseKernel(eps), fmap, x0, n, rng).points)
    return out


@pytest.fixture(scope="module")
def doubling_orbits():
    t0 = time.perf_counter()
    orbits = _orbits(linear(2))
    return orbits, time.perf_counter() - t0


@pytest.fixture(scope="module")
def doubling_shadows(doubling_orbits):
    t0 = time.perf_counter()
    shadows = shadow_many(linear(2), doubling_orbits[0])
    return shadows, time.perf_counter() - t0


@pytest.fixture(scope="module")
def cat_orbits():
    return _orbits(cat_map())


def test_criterion_1_pseudo_orbit_contract(doubling_orbits, capsys):
    orbits, gen_time = doubling_orbits
    t0 = time.perf_counter()
    checks = [verify_pseudo_orbit(linear(2), x, EPS) for x in orbits]
    elapsed = gen_time + time.perf_counter() - t0
    worst = max(c.max_gap for c in checks)
    ok = len(checks) == ORBITS and all(c.valid for c in checks) and worst <= EPS and elapsed <= 1.0
    report(1, ok, f"{ORBITS} doubling orbits, eps=1e-3, n=1e4: all valid, max gap {worst:.6g} <= 1e-3, {elapsed:.2f} s <= 1 s", capsys)
    assert ok


def test_criterion_2_shadowing_certificate(doubling_orbits, doubling_shadows, cat_orbits, capsys):
    orbits, _ = doubling_orbits
    shadows, t_shadow = doubling_shadows
    t0 = time.perf_counter()
    certs = [certify(linear(2), x, sh, 2e-3 + 1e-9) for x, sh in zip(orbits, shadows)]
    sd = max(c.shadow_distance for c in certs)
    cons = max(c.consistency for c in certs)
    interior = max(float(sh.deviation[: N - 20 + 1].max()) for sh in shadows)
    c_a = cat_constant()
    cat_shadows = shadow_many(cat_map(), cat_orbits)
    cat_certs = [certify(cat_map(), x, sh, c_a * EPS + 1e-9) for x, sh in zip(cat_orbits, cat_shadows)]
    elapsed = t_shadow + time.perf_counter() - t0
    cat_sd = max(c.shadow_distance for c in cat_certs)
    cat_cons = max(c.consistency for c in cat_certs)
    ok = (
        cons <= CONSISTENCY_TOL
        and sd <= 2e-3
        and interior <= 1e-3
        and all(c.passed for c in certs)
        and cat_cons <= CONSISTENCY_TOL
        and cat_sd <= c_a * EPS
        and all(c.passed for c in cat_certs)
        and elapsed <= 2.0
    )
    report(
        2,
        ok,
        f"doubling shadow distance {sd:.4g} <= 2e-3, interior {interior:.4g} <= 1e-3, consistency {cons:.2g}; "
        f"cat shadow distance {cat_sd:.4g} <= C_A*eps = {c_a * EPS:.4g}, consistency {cat_cons:.2g}; "
        f"shadowing+certification {elapsed:.2f} s <= 2 s",
        capsys,
    )
    assert ok


def test_criterion_3_time_average_inequality(doubling_orbits, doubling_shadows, capsys):
    orbits, _ = doubling_orbits
    shadows, _ = doubling_shadows
    dictionary = standard_dictionary(1)
    lips = np.array([phi.lip_const for phi in dictionary])
    worst = -math.inf
    checked = 0
    for x, sh in zip(orbits, shadows):
        lhs = np.abs(evaluate_all(dictionary, sh.points).mean(axis=1) - evaluate_all(dictionary, x).mean(axis=1))
        rhs = lips * sh.shadow_distance
        worst = max(worst, float(np.max(lhs - rhs)))
        checked += len(dictionary)
    ok = worst <= 1e-9 and checked == ORBITS * 17
    report(3, ok, f"{checked} (orbit, observable) pairs, max(lhs - Lip*shadow_distance) = {worst:.3g} <= 1e-9", capsys)
    assert ok


def test_criterion_4_exact_stationary_invariance(capsys):
    t0 = time.perf_counter()
    d = stationary_distribution(build_ulam(linear(2), NoiseKernel(0.01), 1024, 4)).measure.density
    c = stationary_distribution(build_ulam(cat_map(), NoiseKernel(0.02), 128, 4)).measure.density
    elapsed = time.perf_counter() - t0
    dd, cd = float(np.abs(d - 1).max()), float(np.abs(c - 1).max())
    ok = dd <= 1e-8 and cd <= 1e-6 and elapsed <= 30
    report(
        4,
        ok,
        f"doubling k=1024 sup|density-1| = {dd:.3g} <= 1e-8; cat 128x128 = {cd:.3g} <= 1e-6; {elapsed:.1f} s <= 30 s",
        capsys,
    )
    assert ok


def test_criterion_5_two_estimator_agreement(capsys):
    cv = cross_validate(nonlinear(0.05), NoiseKernel(0.02), 4096, 10**6, 10, burn_in=10_000, q=4, master_seed=0)
    budget = 2 * (1 / 4096 + 3 / 1000)
    ok = cv.w1_median <= budget
    report(5, ok, f"median W1(Ulam k=4096, MC n=1e6) over 10 seeds = {cv.w1_median:.4g} <= {budget:.4g}", capsys)
    assert ok


def test_criterion_6_stochastic_stability_trend(capsys):
    cfg = load_config(CONFIGS / "nonlinear_sweep.toml")
    assert cfg.epsilons == (0.1, 0.05, 0.02, 0.01, 0.005)
    t0 = time.perf_counter()
    r = run_sweep(cfg)
    elapsed = time.perf_counter() - t0
    w = r.w1
    monotone = all(b <= 1.1 * a for a, b in zip(w, w[1:]))
    ok = monotone and w[-1] <= w[0] / 5 and r.bound_ok and elapsed <= 300
    report(
        6,
        ok,
        "W1(mu_eps, mu_0) = " + ", ".join(f"{v:.3g}" for v in w)
        + f"; non-increasing (10%): {monotone}; last/first = {w[-1] / w[0]:.3g} <= 0.2; "
        f"all bound flags: {r.bound_ok}; {elapsed:.0f} s <= 300 s",
        capsys,
    )
    assert ok


def test_criterion_7_w1_oracle(capsys):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 7))
        x, y = rng.random(n), rng.random(n)
        got = wasserstein1_circle(empirical_from_sequence(x), empirical_from_sequence(y))
        worst = max(worst, abs(got - w1_assignment(x, y)))
    # unequal sizes and weights, against the transport LP
    worst_lp = 0.0
    for _ in range(200):
        m, n = rng.integers(1, 7, size=2)
        x, y = rng.random(m), rng.random(n)
        wx, wy = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(n))
        got = wasserstein1_circle(EmpiricalMeasure(x, wx), EmpiricalMeasure(y, wy))
        worst_lp = max(worst_lp, abs(got - w1_linprog(x, wx, y, wy)))
    ok = worst <= 1e-10 and worst_lp <= 1e-9
    report(
        7,
        ok,
        f"200 random pairs of <=6-atom measures, max |W1 - assignment oracle| = {worst:.3g} <= 1e-10; "
        f"200 weighted pairs vs transport LP = {worst_lp:.3g} <= 1e-9",
        capsys,
    )
    assert ok


def test_criterion_8_birkhoff_scaling(capsys):
    cfg = load_config(CONFIGS / "doubling_birkhoff.toml")
    assert cfg.seeds == 10 and cfg.max_k == 3
    r = run_birkhoff(cfg)
    det, ran = r.slope("deterministic"), r.slope("random")
    ok = -0.65 <= det <= -0.35 and -0.65 <= ran <= -0.35
    report(8, ok, f"log-log slopes: deterministic {det:.3f}, random {ran:.3f}, both in [-0.65, -0.35]", capsys)
    assert ok


DETERMINISM_CONFIGS = {
    "nonlinear": """
seed = 11
[map]
family = "nonlinear"
a = 0.05
[noise]
shape = "cosine-bump"
epsilon = [0.05, 0.02]
[run]
n = 3000
orbits = 4
seeds = 3
burn_in = 200
ulam_k = 256
birkhoff_log2 = [8, 13]
""",
    "cat": """
seed = 3
[map]
family = "cat"
[noise]
epsilon = [0.05]
[run]
n = 2000
orbits = 3
seeds = 2
burn_in = 100
ulam_k = 32
birkhoff_log2 = [8, 12]
[dictionary]
max_k = 2
""",
}


def test_criterion_9_determinism(tmp_path, capsys):
    compared, differing = 0, []
    for name, text in DETERMINISM_CONFIGS.items():
        cfg_path = tmp_path / f"{name}.toml"
        cfg_path.write_text(text)
        for command in cli.COMMANDS:
            runs = []
            for rep in ("first", "second"):
                out = tmp_path / name / rep / f"{command}.csv"
                code = cli.main([command, "--config", str(cfg_path), "--out", str(out)])
                assert code == 0
                runs.append({p.name: p.read_bytes() for p in out.parent.glob(f"{command}*.csv")})
            compared += len(runs[0])
            if runs[0] != runs[1]:
                differing.append(f"{name}/{command}")
    ok = not differing and compared >= 2 * len(cli.COMMANDS)
    report(9, ok, f"{compared} CSV files from all {len(cli.COMMANDS)} commands x 2 maps byte-identical on rerun"
           + (f"; differing: {differing}" if differing else ""), capsys)
    assert ok



def main() -> int:
    import tempfile

    t0 = time.perf_counter()
    orbits_t = (_orbits(linear(2)), time.perf_counter() - t0)
    t0 = time.perf_counter()
    shadows_t = (shadow_many(linear(2), orbits_t[0]), time.perf_counter() - t0)
    cats = _orbits(cat_map())
    steps = [
        lambda: test_criterion_1_pseudo_orbit_contract(orbits_t, None),
        lambda: test_criterion_2_shadowing_certificate(orbits_t, shadows_t, cats, None),
        lambda: test_criterion_3_time_average_inequality(orbits_t, shadows_t, None),
        lambda: test_criterion_4_exact_stationary_invariance(None),
        lambda: test_criterion_5_two_estimator_agreement(None),
        lambda: test_criterion_6_stochastic_stability_trend(None),
        lambda: test_criterion_7_w1_oracle(None),
        lambda: test_criterion_8_birkhoff_scaling(None),
        lambda: test_criterion_9_determinism(Path(tempfile.mkdtemp()), None),
    ]
    for i, step in enumerate(steps, start=1):
        try:
            step()
        except AssertionError:
            pass
        except Exception as exc:  # report and keep going
            report(i, False, f"raised {type(exc).__name__}: {exc}")
    passed = sum(RESULTS.values())
    print(f"{passed}/{len(steps)} criteria passed")
    return 0 if passed == len(steps) else 1


if __name__ == "__main__":
    sys.exit(main())
