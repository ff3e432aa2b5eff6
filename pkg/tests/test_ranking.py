import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stable_lasso.data import SeedSpec, standardize
from stable_lasso.errors import SingularSystem
from stable_lasso.ranking import (Ranking, air_holp, default_threshold, ranks_from_scores, ranks_to_weights,
                                  ridge_holp)
from stable_lasso.scenarios import generate, preset

from conftest import make_dataset


def test_identity_design_small_penalty():
    d = make_dataset(np.eye(2), [2.0, 1.0])
    r = ridge_holp(d, 1e-9)
    np.testing.assert_allclose(r.scores, [2.0, 1.0], rtol=1e-8)
    np.testing.assert_array_equal(r.ranks, [1, 2])


@pytest.mark.parametrize("pen", [1e-3, 0.5, 10.0, 1e4])
def test_identity_design_any_penalty(pen):
    d = make_dataset(np.eye(2), [2.0, 1.0])
    r = ridge_holp(d, pen)
    np.testing.assert_allclose(r.scores, np.array([2.0, 1.0]) / (1 + pen))
    np.testing.assert_array_equal(r.ranks, [1, 2])


def test_zero_response_ties_by_index():
    rng = np.random.default_rng(0)
    d = make_dataset(rng.standard_normal((5, 8)), np.zeros(5))
    r = ridge_holp(d)
    np.testing.assert_array_equal(r.scores, 0.0)
    np.testing.assert_array_equal(r.ranks, np.arange(1, 9))


def test_singular_system():
    d = make_dataset(np.ones((3, 2)), [1.0, 0.0, -1.0])
    with pytest.raises(SingularSystem):
        ridge_holp(d, 1e-15)
    with pytest.raises(ValueError):
        ridge_holp(d, 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_matches_pseudoinverse(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((10, 30)), rng.standard_normal(10)
    d = make_dataset(x, y)
    np.testing.assert_allclose(ridge_holp(d, 1e-10).scores, np.abs(np.linalg.pinv(x) @ y), atol=1e-8)


@pytest.mark.parametrize("pen", [0.1, 10.0])
def test_matches_primal_ridge(pen):
    rng = np.random.default_rng(7)
    x, y = rng.standard_normal((10, 30)), rng.standard_normal(10)
    primal = np.linalg.solve(x.T @ x + pen * np.eye(30), x.T @ y)
    np.testing.assert_allclose(ridge_holp(make_dataset(x, y), pen).scores, np.abs(primal), atol=1e-8)


def test_orthonormal_rows_rank_invariant():
    rng = np.random.default_rng(1)
    q, _ = np.linalg.qr(rng.standard_normal((40, 8)))
    d = make_dataset(q.T, rng.standard_normal(8))
    base = ridge_holp(d, 1e-6).ranks
    for pen in (1e-2, 1.0, 10.0, 1e3):
        np.testing.assert_array_equal(ridge_holp(d, pen).ranks, base)
    np.testing.assert_array_equal(air_holp(d, 3, 10).ranks, base)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((8, 15)), rng.standard_normal(8)
    perm = rng.permutation(15)
    a = ridge_holp(make_dataset(x, y), 1.0)
    b = ridge_holp(make_dataset(x[:, perm], y), 1.0)
    np.testing.assert_allclose(b.scores, a.scores[perm], rtol=1e-10)
    np.testing.assert_array_equal(b.ranks, a.ranks[perm])


def test_ranks_from_scores_ties():
    np.testing.assert_array_equal(ranks_from_scores([1.0, 3.0, 3.0, 0.5]), [3, 1, 2, 4])


def test_air_holp_single_iteration_is_ridge_holp(random_problem):
    d = random_problem(30, 80, 2)
    a = air_holp(d, default_threshold(30), max_iter=1)
    assert a.iterations_used == 1
    b = ridge_holp(d, a.ridge_penalty)
    np.testing.assert_array_equal(a.ranks, b.ranks)
    np.testing.assert_allclose(a.scores, b.scores)


def test_air_holp_stops_at_fixed_point(random_problem):
    d = random_problem(40, 200, 5)
    a = air_holp(d, 10, max_iter=10)
    assert 1 <= a.iterations_used <= 10
    assert sorted(a.ranks) == list(range(1, 201))
    with pytest.raises(ValueError):
        air_holp(d, 0)
    with pytest.raises(ValueError):
        air_holp(d, 5, max_iter=0)


def _main_ranks(rep):
    spec = preset("main", SeedSpec(11, rep))
    x, y, _ = generate(spec)
    return air_holp(standardize(x, y), 21, 10).ranks, spec


@pytest.mark.slow
def test_main_scenario_partial_screening():
    # Within the two least correlated groups the relevant variable outranks
    # every correlated irrelevant variable (partial screening consistency);
    # at n=100 this fails increasingly often for rho >= 0.9.
    hits = np.zeros(5)
    for rep in range(20):
        ranks, spec = _main_ranks(rep)
        for g, (start, stop, _) in enumerate(spec.groups):
            rel = stop - 1
            hits[g] += ranks[rel] < ranks[start:stop - 1].min()
    assert np.all(hits[:2] >= 18), hits
    assert hits[4] <= hits[0]


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="the rho=0.99 group's relevant variable is not separable at n=100; "
                                       "see README 'Known deviations'")
def test_main_scenario_full_screening():
    ok = 0
    for rep in range(20):
        ranks, spec = _main_ranks(rep)
        truth = sorted(spec.true_support)
        ok += ranks[truth].max() <= 5
    assert ok >= 18


def test_weights_examples():
    np.testing.assert_allclose(ranks_to_weights(np.array([1, 2, 3])), [0.0, 0.5, 2 / 3])
    w = ranks_to_weights(np.arange(1, 1001))
    assert w[0] == 0.0
    assert w[-1] == pytest.approx(0.999)
    assert np.all(np.diff(w[-2:]) < 1e-5)


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(1, 21))))
def test_weights_invariants(ranks):
    ranks = np.array(ranks)
    w = ranks_to_weights(Ranking(ranks, np.zeros(20), 1.0))
    assert np.all((w >= 0) & (w < 1))
    assert np.sum(w == 0) == 1 and w[ranks == 1][0] == 0
    np.testing.assert_array_equal(w, 1 - 1 / ranks)
    for j in range(20):
        for k in range(20):
            assert (ranks[j] < ranks[k]) == (w[j] < w[k])


@pytest.mark.parametrize("n, d", [(100, 21), (60, 14), (3, 2)])
def test_default_threshold(n, d):
    assert default_threshold(n) == d


def test_default_threshold_precondition():
    with pytest.raises(ValueError):
        default_threshold(2)
