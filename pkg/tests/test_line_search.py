import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asyncnewton.core import Bounds, EvaluationRecord, contains, make_benchmark, make_rng
from asyncnewton.line_search import (
    AlphaInterval, EmptyIntervalError, LineSpec, backtracking_search, clip_alpha, sample_line,
    select_best,
)

BOX = Bounds.uniform(-1, 1, 2)


@pytest.mark.parametrize("d,requested,bounds,expected", [
    ((1, 0), (0, 5), BOX, (0, 1)),
    ((1, 1), (-5, 5), BOX, (-1, 1)),
    ((1, 0), (0, 2), Bounds.uniform(-10, 10, 2), (0, 2)),
])
def test_clip_alpha_examples(d, requested, bounds, expected):
    got = clip_alpha(LineSpec([0, 0], d, *requested), bounds)
    assert got == pytest.approx(expected, abs=1e-15)


def test_clip_alpha_empty():
    with pytest.raises(EmptyIntervalError):
        clip_alpha(LineSpec([1.0, 0.0], [1.0, 0.0], 0.5, 2.0), BOX)


def test_clip_alpha_origin_outside():
    with pytest.raises(ValueError):
        clip_alpha(LineSpec([2.0, 0.0], [1.0, 0.0], 0.0, 1.0), BOX)


def test_line_spec_invariants():
    with pytest.raises(ValueError):
        LineSpec([0, 0], [0, 0], 0, 1)
    with pytest.raises(ValueError):
        LineSpec([0, 0], [1, 0], 1, 1)


def test_sample_line_examples():
    line = LineSpec([0, 0], [1, 0], 0, 2)
    np.testing.assert_array_equal(sample_line(line, AlphaInterval(0, 2), 0.5), [1, 0])
    np.testing.assert_array_equal(sample_line(line, AlphaInterval(0.25, 2), 0.0), line.point(0.25))
    diag = LineSpec([0, 0], [1, 1], -1, 1)
    np.testing.assert_array_equal(sample_line(diag, AlphaInterval(-1, 1), 0.75), [0.5, 0.5])


@pytest.mark.parametrize("r", [-0.1, 1.0, 1.5])
def test_sample_line_rejects_r(r):
    with pytest.raises(ValueError):
        sample_line(LineSpec([0, 0], [1, 0], 0, 1), AlphaInterval(0, 1), r)


def test_sample_line_containment_10000_triples():
    rng = make_rng(77)
    for _ in range(10_000):
        n = int(rng.integers(1, 6))
        lo = rng.uniform(-10, 5, n)
        b = Bounds(lo, lo + rng.uniform(1e-3, 10, n))
        origin = rng.uniform(b.lower, b.upper)
        d = rng.normal(size=n) * 10.0 ** rng.uniform(-3, 3)
        a0 = rng.uniform(-5, 0)
        line = LineSpec(origin, d, a0, a0 + rng.uniform(1e-3, 10))
        try:
            clipped = clip_alpha(line, b)
        except EmptyIntervalError:
            continue
        assert contains(b, sample_line(line, clipped, rng.random()))
        assert contains(b, line.point(clipped.lo)) and contains(b, line.point(clipped.hi))


@settings(max_examples=300, deadline=None)
@given(
    origin=st.lists(st.floats(-1, 1), min_size=3, max_size=3),
    d=st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3).filter(lambda v: any(v)),
    r=st.floats(0, 1, exclude_max=True),
)
def test_sample_line_containment_property(origin, d, r):
    line = LineSpec(origin, d, -50.0, 50.0)
    b = Bounds.uniform(-1, 1, 3)
    clipped = clip_alpha(line, b)
    assert clipped.lo <= 0 <= clipped.hi
    assert contains(b, sample_line(line, clipped, r))


def rec(fitness, point=(0.0,)):
    return EvaluationRecord(np.array(point, dtype=float), fitness)


def test_select_best_examples():
    recs = [rec(3.0), rec(1.0), rec(2.0)]
    assert select_best(recs) is recs[1]
    single = [rec(5.0)]
    assert select_best(single) is single[0]
    first, second = rec(1.0, (0, 0)), rec(1.0, (0, 1))
    assert select_best([first, second]) is first
    with pytest.raises(ValueError):
        select_best([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.randoms(use_true_random=False))
def test_select_best_permutation(values, rnd):
    recs = [rec(v, (i,)) for i, v in enumerate(values)]
    shuffled = recs[:]
    rnd.shuffle(shuffled)
    a, b = select_best(recs), select_best(shuffled)
    assert a.fitness == b.fitness == min(values)
    # among ties the earliest arrival wins
    assert b is next(r for r in shuffled if r.fitness == b.fitness)


def test_backtracking_sphere_descent():
    f = make_benchmark("sphere", 2)
    res = backtracking_search(f, [2.0, 0.0], [-1.0, 0.0])
    assert res.fitness < 4.0
    assert f(res.point) == res.fitness


def test_backtracking_zero_direction():
    f = make_benchmark("sphere", 2)
    res = backtracking_search(f, [2.0, 0.0], [0.0, 0.0])
    np.testing.assert_array_equal(res.point, [2.0, 0.0])
    assert res.alpha == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_backtracking_newton_step_on_quadratic(seed):
    f = make_benchmark("quadratic_spd", 4, seed=seed)
    x = make_rng(seed).uniform(-2, 2, 4)
    d = np.linalg.solve(f.params["hessian"], -f.analytic_gradient(x))
    res = backtracking_search(f, x, d)
    assert res.alpha == 1.0
    assert abs(res.fitness - f.f_star) <= 1e-10


def test_backtracking_returns_x_for_ascent():
    f = make_benchmark("sphere", 1)
    res = backtracking_search(f, [1.0], [1.0])
    np.testing.assert_array_equal(res.point, [1.0])
    assert res.fitness == 1.0


@pytest.mark.parametrize("seed", range(100))
def test_escape_from_shallow_basin(seed):
    f = make_benchmark("double_well", 1)
    shallow = f.params["shallow_minimum"]
    barrier = f.params["barrier"]
    line = LineSpec([shallow], [-1.0], -1.0, 3.0)
    clipped = clip_alpha(line, f.bounds)
    # interval spans both basins
    assert line.point(clipped.hi)[0] < f.known_minimum[0][0] < barrier < shallow
    rng = make_rng(seed)
    recs = [EvaluationRecord(p, f(p)) for p in (sample_line(line, clipped, rng.random()) for _ in range(1000))]
    assert select_best(recs).point[0] < barrier


def test_monotone_coverage_and_resolution():
    f = make_benchmark("sphere", 3)
    x = np.array([2.0, -1.0, 0.5])
    line = LineSpec(x, -x, -0.5, 2.0)
    clipped = clip_alpha(line, f.bounds)
    rng = make_rng(3)
    rs = rng.random(1000)
    mins = [min(f(sample_line(line, clipped, r)) for r in rs[:k]) for k in (10, 100, 1000)]
    assert mins[0] >= mins[1] >= mins[2]
    width = clipped.hi - clipped.lo
    # f along the line is |x|^2 (1 - alpha)^2, minimum 0 at alpha = 1
    assert mins[2] <= (x @ x) * (10 * width / 1000) ** 2
