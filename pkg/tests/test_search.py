import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tolfalsify.search import CMAES, RandomSearch, default_popsize, generations, make_optimizer, minimize


class Counting:
    def __init__(self, f):
        self.f, self.calls = f, 0

    def __call__(self, x):
        self.calls += 1
        return self.f(x)


def sphere(c):
    c = np.asarray(c)
    return lambda x: float(np.sum((x - c) ** 2))


def test_default_popsize():
    assert default_popsize(1) == 4
    assert default_popsize(2) == 6
    assert default_popsize(10) == 4 + int(3 * math.log(10))


@pytest.mark.parametrize("kind", ["cmaes", "random"])
def test_candidates_inside_box(kind):
    lo, hi = np.array([-1.0, 0.0, 5.0]), np.array([1.0, 0.01, 50.0])
    opt = make_optimizer(kind, lo, hi, seed=4)
    for _ in range(20):
        xs = opt.ask()
        assert xs.shape == (opt.popsize, 3)
        assert np.all(xs >= lo) and np.all(xs <= hi)
        opt.tell(xs, np.random.default_rng(0).normal(size=len(xs)))


def test_unit_interval_samples_stay_in_range():
    opt = CMAES([0.0], [1.0], seed=0)
    assert opt.mean.tolist() == [0.5]
    xs = opt.ask()
    assert np.all((xs >= 0) & (xs <= 1))


def test_random_search_is_reproducible():
    a = RandomSearch([0, 0], [1, 2], seed=9).ask()
    b = RandomSearch([0, 0], [1, 2], seed=9).ask()
    c = RandomSearch([0, 0], [1, 2], seed=10).ask()
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_cmaes_is_reproducible():
    r1 = minimize(sphere([0.3, -0.2]), [-1, -1], [1, 1], 120, seed=2)
    r2 = minimize(sphere([0.3, -0.2]), [-1, -1], [1, 1], 120, seed=2)
    assert r1[1] == r2[1]
    assert all(np.array_equal(a[0], b[0]) for a, b in zip(r1[2], r2[2]))


def test_sphere_converges():
    f = Counting(sphere([0.37, -0.61]))
    x, v, hist = minimize(f, [-1, -1], [1, 1], 400, seed=0)
    assert v < 1e-3
    assert f.calls == len(hist) == 400
    assert v == min(h[1] for h in hist)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 200), st.integers(1, 5), st.sampled_from(["cmaes", "random"]), st.integers(0, 99))
def test_budget_is_never_exceeded(budget, dim, kind, seed):
    f = Counting(lambda x: float(np.sum(x)))
    _, _, hist = minimize(f, np.zeros(dim), np.ones(dim), budget, seed=seed, kind=kind)
    assert f.calls == len(hist) == budget


def test_budget_equal_to_popsize_is_one_generation():
    opt = CMAES([0, 0], [1, 1], seed=0)
    batches = list(generations(opt, opt.popsize))
    assert len(batches) == 1 and batches[0][1]


def test_partial_generation_is_flagged():
    opt = CMAES([0, 0], [1, 1], seed=0)
    sizes = [(len(xs), full) for xs, full in generations(opt, 2 * opt.popsize + 1)]
    assert sizes == [(opt.popsize, True), (opt.popsize, True), (1, False)]


def test_zero_budget_and_zero_dimension():
    f = Counting(lambda x: 1.0)
    assert minimize(f, [0], [1], 0) == (None, math.inf, [])
    x, v, hist = minimize(f, [], [], 10)
    assert x.shape == (0,) and v == 1.0 and len(hist) == 1


def test_constant_function():
    x, v, hist = minimize(lambda x: 2.5, [0, 0], [1, 1], 30, seed=1)
    assert v == 2.5
    assert any(np.array_equal(x, h[0]) for h in hist)


def test_identical_values_keep_mean_and_covariance():
    opt = CMAES([0, 0, 0], [1, 1, 1], seed=3)
    mean, cov, sigma = opt.mean.copy(), opt.C.copy(), opt.sigma
    xs = opt.ask()
    opt.tell(xs, [1.0] * len(xs))
    assert np.array_equal(opt.mean, mean)
    assert np.array_equal(opt.C, cov)
    assert opt.sigma > sigma


def test_better_candidate_pulls_mean_toward_it():
    opt = CMAES([0, 0], [1, 1], seed=5)
    xs = opt.ask()
    target = xs[0]
    values = [0.0 if i == 0 else 1.0 + i for i in range(len(xs))]
    before = np.linalg.norm(opt.mean - target)
    opt.tell(xs, values)
    assert np.linalg.norm(opt.mean - target) < before


def test_nonfinite_values_rank_last():
    opt = CMAES([0, 0], [1, 1], seed=6)
    xs = opt.ask()
    values = [math.nan, math.inf] + [float(i) for i in range(len(xs) - 2)]
    opt.tell(xs, values)
    assert opt.best_f == 0.0
    assert np.array_equal(opt.best_x, xs[2])
    assert np.all(np.isfinite(opt.mean))


def test_tell_errors():
    opt = CMAES([0, 0], [1, 1])
    with pytest.raises(RuntimeError):
        opt.tell([], [])
    xs = opt.ask()
    with pytest.raises(ValueError):
        opt.tell(xs, [0.0])


def test_bad_construction():
    with pytest.raises(ValueError):
        CMAES([0, 1], [1])
    with pytest.raises(ValueError):
        CMAES([1], [0])
    with pytest.raises(ValueError):
        CMAES([0], [1], sigma0=0)
    with pytest.raises(ValueError):
        make_optimizer("nelder-mead", [0], [1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6))
def test_state_invariants_hold_during_a_run(seed, dim):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0, 1, dim)
    opt = CMAES(np.zeros(dim), np.ones(dim), seed=seed)
    for _ in range(15):
        xs = opt.ask()
        opt.tell(xs, [float(np.sum(np.abs(x - c))) for x in xs])
        assert np.all((opt.mean >= 0) & (opt.mean <= 1))
        assert opt.sigma > 0
        assert np.allclose(opt.C, opt.C.T)
        assert np.min(np.linalg.eigvalsh(opt.C)) > 0


def test_x0_sets_initial_mean():
    opt = CMAES([0, 10], [2, 20], x0=[0.5, 15])
    assert opt.mean.tolist() == [0.25, 0.5]
