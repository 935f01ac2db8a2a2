import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asyncnewton.core import (
    BENCHMARKS, Bounds, DimensionError, as_steps, contains, fork_rng, make_benchmark, make_rng,
    sample_box,
)


def test_sphere_value():
    f = make_benchmark("sphere", 2)
    assert f([3.0, 4.0]) == 25.0


def test_double_well_value():
    f = make_benchmark("double_well", 1)
    assert f([1.0]) == 0.2


def test_quadratic_known_minimum_matches_independent_solve():
    f = make_benchmark("quadratic_spd", 4, seed=7)
    h, g, c = f.params["hessian"], f.params["linear"], f.params["constant"]
    x_star = np.linalg.solve(h, -g)
    f_star = 0.5 * x_star @ h @ x_star + g @ x_star + c
    x_rec, f_rec = f.known_minimum
    np.testing.assert_allclose(x_rec, x_star, atol=1e-12)
    assert f(x_rec) == pytest.approx(f_star, abs=1e-12)
    assert f(x_rec) == f_rec
    assert np.linalg.norm(f.analytic_gradient(x_rec)) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_quadratic_condition_number(seed):
    h = make_benchmark("quadratic_spd", 8, seed=seed).params["hessian"]
    np.testing.assert_array_equal(h, h.T)
    eig = np.linalg.eigvalsh(h)
    assert eig.min() > 0
    assert eig.max() / eig.min() <= 1e3 * (1 + 1e-9)


def test_double_well_has_two_minima_of_unequal_depth():
    f = make_benchmark("double_well", 1)
    deep, deep_f = f.known_minimum
    shallow = f.params["shallow_minimum"]
    assert deep[0] < 0 < shallow
    assert deep_f < f([shallow])
    for x in (deep[0], shallow):
        # stationary points of (x^2 - 1)^2 + 0.2 x
        assert abs(4 * x ** 3 - 4 * x + 0.2) < 1e-10


def test_rosenbrock_gradient_matches_formula():
    f = make_benchmark("rosenbrock", 2)
    np.testing.assert_allclose(f.analytic_gradient(np.zeros(2)), [-2.0, 0.0])
    assert f([1.0, 1.0]) == 0.0


def test_benchmark_errors():
    with pytest.raises(ValueError):
        make_benchmark("ackley", 2)
    with pytest.raises(DimensionError):
        make_benchmark("double_well", 2)


@pytest.mark.parametrize("p,expected", [((0, 0), True), ((1, 1), True), ((1.0001, 0), False)])
def test_contains(p, expected):
    assert contains(Bounds.uniform(-1, 1, 2), p) is expected


def test_contains_dimension_mismatch():
    with pytest.raises(DimensionError):
        contains(Bounds.uniform(-1, 1, 2), (0, 0, 0))


def test_bounds_validation():
    with pytest.raises(ValueError):
        Bounds(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(DimensionError):
        Bounds(np.zeros(2), np.ones(3))


def test_steps_must_be_positive():
    with pytest.raises(ValueError):
        as_steps([0.1, 0.0], 2)
    np.testing.assert_array_equal(as_steps(0.5, 3), [0.5, 0.5, 0.5])


def test_sample_box_examples():
    b = Bounds.uniform(-1, 1, 2)
    rng = make_rng(0)
    for _ in range(200):
        assert np.all(np.abs(sample_box([0, 0], [0.1, 0.1], b, rng)) <= 0.1)
        p = sample_box([1, 0], [0.5, 0.5], b, rng)
        assert 0.5 <= p[0] <= 1.0
    a = sample_box([0, 0], [0.1, 0.1], b, make_rng(42))
    c = sample_box([0, 0], [0.1, 0.1], b, make_rng(42))
    np.testing.assert_array_equal(a, c)


def test_sample_box_rejects_outside_center():
    with pytest.raises(ValueError):
        sample_box([2.0, 0.0], [0.1, 0.1], Bounds.uniform(-1, 1, 2), make_rng(0))


def test_sample_box_containment_10000_configs():
    rng = make_rng(123)
    for _ in range(10_000):
        n = int(rng.integers(1, 6))
        lo = rng.uniform(-10, 5, n)
        hi = lo + rng.uniform(1e-6, 10, n)
        b = Bounds(lo, hi)
        center = rng.uniform(lo, hi)
        s = rng.uniform(1e-6, 20, n)
        assert contains(b, sample_box(center, s, b, rng))


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(1, 5),
    seed=st.integers(0, 2 ** 32 - 1),
    frac=st.floats(0, 1),
    s=st.floats(1e-9, 1e3),
)
def test_sample_box_containment_property(n, seed, frac, s):
    b = Bounds.uniform(-3, 7, n)
    center = b.lower + frac * (b.upper - b.lower)
    p = sample_box(center, np.full(n, s), b, make_rng(seed))
    assert contains(b, p)
    assert np.all(np.abs(p - center) <= s)


def test_rng_reproducibility_million_draws():
    a = make_rng(2024).random(1_000_000)
    b = make_rng(2024).random(1_000_000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a[:10], make_rng(2025).random(10))


def test_fork_rng_streams_differ_and_repeat():
    assert np.array_equal(fork_rng(1, 2).random(5), fork_rng(1, 2).random(5))
    assert not np.array_equal(fork_rng(1, 2).random(5), fork_rng(1, 3).random(5))


@pytest.mark.parametrize("name", BENCHMARKS)
def test_evaluation_is_deterministic(name):
    n = 1 if name == "double_well" else 3
    f = make_benchmark(name, n, seed=3)
    x = make_rng(9).uniform(f.bounds.lower, f.bounds.upper)
    first = f(x)
    assert np.isfinite(first)
    assert all(f(x.copy()) == first for _ in range(1000))


def test_simulated_cost_is_kept():
    assert make_benchmark("sphere", 2, simulated_cost=3.0).simulated_cost == 3.0
