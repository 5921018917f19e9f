import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import w1_assignment, w1_linprog
from shadowlab.dynamics import linear, typical_orbit
from shadowlab.errors import UsageError
from shadowlab.measures import (
    EmpiricalMeasure,
    GridMeasure,
    LebesgueMeasure,
    Observable,
    birkhoff_average,
    constant,
    dictionary_gap,
    empirical_from_sequence,
    evaluate_all,
    fourier,
    integrate,
    read_empirical_csv,
    read_grid_csv,
    standard_dictionary,
    trig_polynomial,
    wasserstein1_circle,
    write_measure_csv,
)
from shadowlab.phase_space import CIRCLE, TORUS, dist

COS = fourier(1, "cos")
unit = st.floats(0.0, 1.0, exclude_max=True)
atoms = st.lists(unit, min_size=1, max_size=6)


def test_empirical_from_sequence():
    m = empirical_from_sequence([0.1, 0.2])
    assert m.points.tolist() == [0.1, 0.2] and m.weights.tolist() == [0.5, 0.5]
    d = empirical_from_sequence(0.3)
    assert len(d) == 1 and d.weights[0] == 1.0
    with pytest.raises(UsageError):
        empirical_from_sequence([])


def test_measure_validation():
    with pytest.raises(UsageError):
        EmpiricalMeasure(np.array([0.1, 0.2]), np.array([0.5, 0.6]))
    with pytest.raises(UsageError):
        EmpiricalMeasure(np.array([0.1, 0.2]), np.array([1.0, 0.0]))
    with pytest.raises(UsageError):
        GridMeasure(1, 4, np.array([0.5, 0.5, 0.5, -0.5]))
    with pytest.raises(UsageError):
        GridMeasure(1, 4, np.ones(3) / 3)


def test_integrate_examples():
    assert integrate(LebesgueMeasure(1), COS) == 0.0
    assert integrate(empirical_from_sequence([0.25]), COS) == pytest.approx(0.0, abs=1e-15)
    assert integrate(GridMeasure.uniform(1, 64), constant()) == pytest.approx(1.0, abs=1e-15)
    assert integrate(GridMeasure.uniform(2, 16), constant(2)) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(UsageError):
        integrate(LebesgueMeasure(2), COS)


def test_birkhoff_average_examples():
    assert birkhoff_average(linear(2), 0.3, 500, constant()) == pytest.approx(1.0, abs=1e-13)
    assert birkhoff_average(linear(2), 0.1, 0, COS) == pytest.approx(math.cos(0.2 * math.pi))
    assert birkhoff_average(linear(2), 0.0, 1000, COS) == pytest.approx(1.0, abs=1e-14)


def test_doubling_orbit_averages(rng):
    z = typical_orbit(linear(2), 10**6, rng)
    m = empirical_from_sequence(z)
    assert abs(integrate(m, COS)) < 5e-3
    assert dictionary_gap(LebesgueMeasure(1), m, standard_dictionary(1)).max_gap <= 5e-3


def test_dictionary_gap_examples():
    d0 = empirical_from_sequence([0.0])
    for x in (0.1, 0.37, 0.5):
        g = dictionary_gap(d0, empirical_from_sequence([x]), [COS])
        assert g.raw[0] == pytest.approx(abs(1 - math.cos(2 * math.pi * x)), abs=1e-15)
        assert g.per_observable[0] == pytest.approx(g.raw[0] / (2 * math.pi + 1))
    m = empirical_from_sequence([0.2, 0.7, 0.9])
    assert dictionary_gap(m, m, standard_dictionary(1)).max_gap == 0.0
    with pytest.raises(UsageError):
        dictionary_gap(m, m, [])


def test_standard_dictionary():
    s1 = standard_dictionary(1)
    assert len(s1) == 17
    t2 = standard_dictionary(2)
    assert len(t2) == 81
    assert len(standard_dictionary(1, 3, include_constant=False)) == 6
    assert all(phi.dim == 2 for phi in t2)
    # tensor products are what their names say
    p = np.random.default_rng(0).random((50, 2))
    phi = next(f for f in t2 if f.name == "sin(2pi*2x)*cos(2pi*3y)")
    np.testing.assert_allclose(phi(p), np.sin(4 * np.pi * p[:, 0]) * np.cos(6 * np.pi * p[:, 1]), atol=1e-14)


def test_evaluate_all_matches_single(rng):
    for dim in (1, 2):
        d = standard_dictionary(dim)
        p = rng.random(40) if dim == 1 else rng.random((40, 2))
        M = evaluate_all(d, p)
        for row, phi in zip(M, d):
            np.testing.assert_array_equal(row, phi(p))


def test_observable_bounds(rng):
    phi = trig_polynomial([0.3, -1.2], [0.5], const=0.1)
    x, y = rng.random(2000), rng.random(2000)
    assert np.all(np.abs(phi(x)) <= phi.sup_bound + 1e-12)
    assert np.all(np.abs(phi(x) - phi(y)) <= phi.lip_const * dist(CIRCLE, x, y) + 1e-12)
    for psi in standard_dictionary(2):
        p, q = rng.random((200, 2)), rng.random((200, 2))
        assert np.all(np.abs(psi(p) - psi(q)) <= psi.lip_const * dist(TORUS, p, q) + 1e-12)
    assert Observable(1, 0.0, (((0,), 2.0, 0.0),)).const == 2.0
    with pytest.raises(UsageError):
        Observable(2, 0.0, (((1,), 1.0, 0.0),))


def test_lebesgue_integral_is_constant_coefficient():
    phi = trig_polynomial([0.4, 0.2, 1.0], [0.1], const=-0.7)
    xs = (np.arange(4096) + 0.5) / 4096
    assert integrate(LebesgueMeasure(1), phi) == -0.7
    assert phi(xs).mean() == pytest.approx(-0.7, abs=1e-14)


def test_w1_examples():
    a = empirical_from_sequence([0.1, 0.4, 0.8])
    assert wasserstein1_circle(a, a) == 0.0
    assert wasserstein1_circle(empirical_from_sequence([0.0]), empirical_from_sequence([0.5])) == pytest.approx(0.5)
    # Lebesgue vs a point mass: mean distance to a point on the circle is 1/4
    assert wasserstein1_circle(GridMeasure.uniform(1, 8), empirical_from_sequence([0.3])) == pytest.approx(0.25)
    assert wasserstein1_circle(LebesgueMeasure(1), GridMeasure.uniform(1, 16)) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(UsageError):
        wasserstein1_circle(LebesgueMeasure(2), LebesgueMeasure(2))


def test_w1_grid_density_oracle():
    # density 2 on [0, 1/2): F_mu - F_leb is a tent of height 1/2, and
    # min_c int |tent - c| is attained at c = 1/4, giving 1/8
    g = GridMeasure(1, 2, np.array([1.0, 0.0]))
    fine = np.linspace(0, 0.5, 200_001)[:-1] + 1.25e-6
    assert wasserstein1_circle(g, LebesgueMeasure(1)) == pytest.approx(
        wasserstein1_circle(empirical_from_sequence(fine), LebesgueMeasure(1)), abs=1e-5
    )
    assert wasserstein1_circle(g, LebesgueMeasure(1)) == pytest.approx(1 / 8, abs=1e-15)


@given(st.integers(1, 6).flatmap(lambda n: st.tuples(st.lists(unit, min_size=n, max_size=n), st.lists(unit, min_size=n, max_size=n))))
def test_w1_matches_assignment(pair):
    x, y = pair
    w = wasserstein1_circle(empirical_from_sequence(x), empirical_from_sequence(y))
    assert w == pytest.approx(w1_assignment(x, y), abs=1e-10)


def test_w1_matches_weighted_lp(rng):
    for _ in range(40):
        m, n = rng.integers(1, 7, 2)
        x, y = rng.random(m), rng.random(n)
        wx, wy = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(n))
        wx /= wx.sum()
        wy /= wy.sum()
        got = wasserstein1_circle(EmpiricalMeasure(x, wx), EmpiricalMeasure(y, wy))
        assert got == pytest.approx(w1_linprog(x, wx, y, wy), abs=1e-9)


@given(atoms, atoms, atoms)
def test_w1_metric(a, b, c):
    A, B, C = (empirical_from_sequence(v) for v in (a, b, c))
    ab = wasserstein1_circle(A, B)
    assert ab == pytest.approx(wasserstein1_circle(B, A), abs=1e-12)
    assert ab <= wasserstein1_circle(A, C) + wasserstein1_circle(C, B) + 1e-10
    assert 0.0 <= ab <= 0.5 + 1e-12
    if sorted(a) == sorted(b):
        assert ab < 1e-12


@given(atoms, atoms)
def test_kantorovich_rubinstein(a, b):
    A, B = empirical_from_sequence(a), empirical_from_sequence(b)
    w = wasserstein1_circle(A, B)
    for phi in standard_dictionary(1, 4):
        assert abs(integrate(A, phi) - integrate(B, phi)) <= phi.lip_const * w + 1e-10


@given(atoms, atoms, st.integers(1, 7))
def test_dictionary_gap_monotone(a, b, k):
    A, B = empirical_from_sequence(a), empirical_from_sequence(b)
    small = dictionary_gap(A, B, standard_dictionary(1, k)).max_gap
    big = dictionary_gap(A, B, standard_dictionary(1, k + 1)).max_gap
    assert big >= small


def test_csv_round_trip(tmp_path, rng):
    e = empirical_from_sequence(rng.random((5, 2)))
    write_measure_csv(tmp_path / "e.csv", e)
    back = read_empirical_csv(tmp_path / "e.csv")
    np.testing.assert_array_equal(back.points, e.points)
    np.testing.assert_array_equal(back.weights, e.weights)
    g = GridMeasure(2, 4, rng.dirichlet(np.ones(16)))
    write_measure_csv(tmp_path / "g.csv", g)
    back = read_grid_csv(tmp_path / "g.csv", dim=2)
    np.testing.assert_array_equal(back.masses, g.masses)
    with pytest.raises(UsageError):
        write_measure_csv(tmp_path / "l.csv", LebesgueMeasure(1))
