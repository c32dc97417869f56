import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curstat.errors import InvalidInputError
from curstat.model import DistributionRepr, Observation, cell_probabilities_many, orthant_indices
from curstat.npmle import (
    build_partition,
    candidate_cells,
    drop_dominated,
    em_solve,
    em_step,
    fit_npmle,
    log_likelihood,
    membership_matrix,
    merge_equivalent_cells,
    mle_distribution,
    optimality_gap,
    oracle_solve,
    reduce_problem,
)
from curstat.univariate import gcm_mle

from oracles import sample_current_status, small_instances


DISJOINT = np.array([[1, 0], [0, 1]], dtype=bool)


# partition and membership -------------------------------------------------------

def test_partition_1d_intervals():
    P = build_partition(([1.0, 2.0], [1, 0]))
    lo, hi = P.cell_bounds(P.unravel(np.arange(P.n_cells)))
    np.testing.assert_array_equal(lo.ravel(), [0, 1, 2])
    np.testing.assert_array_equal(hi.ravel(), [1, 2, np.inf])


def test_partition_counts():
    assert build_partition([Observation((0.5, 0.5), (1, 1))]).n_cells == 4
    obs = [Observation((0.3, 0.6), (1, 0)), Observation((0.6, 0.3), (0, 1))]
    assert build_partition(obs).n_cells == 9
    T = np.array([[0.1, 0.2], [0.1, 0.3], [0.4, 0.3]])
    assert build_partition((T, np.ones((3, 2), int))).n_cells == 3 * 3


def test_partition_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        build_partition([Observation((0.1,), (1,)), Observation((0.1, 0.2), (1, 1))])
    P = build_partition(([[0.1, 0.2]], [[1, 1]]))
    with pytest.raises(InvalidInputError):
        membership_matrix(P, ([0.1], [1]))


def _row_by_orthant(delta):
    obs = [Observation((0.5, 0.5), delta)]
    P = build_partition(obs)
    mm = membership_matrix(P, obs)
    # cell key (a, b) is C_k with k = 1 + a + 2 b
    k = 1 + mm.keys[:, 0] + 2 * mm.keys[:, 1]
    return mm.A[0][np.argsort(k)].astype(int)


def test_membership_rows():
    np.testing.assert_array_equal(_row_by_orthant((1, 1)), [1, 0, 0, 0])
    np.testing.assert_array_equal(_row_by_orthant((0, 0)), [0, 0, 0, 1])
    np.testing.assert_array_equal(_row_by_orthant((0, 1)), [0, 1, 0, 0])


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 15), d=st.integers(1, 3), seed=st.integers(0, 2**32 - 1))
def test_membership_matches_regions(n, d, seed):
    rng = np.random.default_rng(seed)
    T, D = sample_current_status(rng, n, d)
    P = build_partition((T, D))
    mm = membership_matrix(P, (T, D))
    assert mm.A.any(axis=1).all()
    # a cell belongs to a row iff its upper corner (a point of the cell) lies in the region
    lo, hi = P.cell_bounds(mm.keys)
    pt = np.where(np.isfinite(hi), hi, lo + 1.0)
    inside = np.all(np.where(D[:, None, :] == 1, pt[None] <= T[:, None, :], pt[None] > T[:, None, :]), axis=2)
    np.testing.assert_array_equal(mm.A, inside)
    # the 2^d regions at one t partition the cells
    t = T[0]
    total = 0
    for k in range(2**d):
        delta = np.array([1 - ((k >> j) & 1) for j in range(d)])
        total += membership_matrix(P, (t[None], delta[None])).A.sum()
    assert total == P.n_cells


# merging and pruning -----------------------------------------------------------------

def test_merge_identical_columns():
    A = np.array([[1, 1, 0], [0, 0, 1]], dtype=bool)
    B, groups = merge_equivalent_cells(A)
    assert B.shape == (2, 2)
    assert [g.tolist() for g in groups] == [[0, 1], [2]]


def test_merge_identity_when_distinct():
    A = np.eye(4, dtype=bool)
    B, groups = merge_equivalent_cells(A)
    np.testing.assert_array_equal(A, B)


def test_merge_preserves_maximum_on_random_matrix():
    rng = np.random.default_rng(4)
    A = rng.random((20, 50)) < 0.3
    A[:, :10] = A[:, 10:20]  # force duplicates
    A[~A.any(axis=1), 0] = True
    A[:, 10:20] = A[:, :10]
    B, _ = merge_equivalent_cells(A)
    assert B.shape[1] < A.shape[1]
    full = em_solve(A, tol=1e-10)
    red = em_solve(B, tol=1e-10)
    assert full.converged and red.converged
    assert log_likelihood(A, full.weights) == pytest.approx(log_likelihood(B, red.weights), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 25), d=st.integers(2, 3), seed=st.integers(0, 2**32 - 1))
def test_pruning_preserves_maximum(n, d, seed):
    rng = np.random.default_rng(seed)
    T, D = sample_current_status(rng, n, d)
    values = {}
    for mode in ("none", "local", "maximal"):
        prob = reduce_problem((T, D), prune=mode)
        fit = em_solve(prob.A, tol=1e-10)
        assert fit.converged
        values[mode] = log_likelihood(prob.A, fit.weights)
    assert values["local"] == pytest.approx(values["none"], abs=1e-8)
    assert values["maximal"] == pytest.approx(values["none"], abs=1e-8)


def test_candidate_cells_cover_every_maximal_column():
    rng = np.random.default_rng(8)
    T, D = sample_current_status(rng, 30, 2)
    P = build_partition((T, D))
    A, groups = merge_equivalent_cells(membership_matrix(P, (T, D)).A)
    maximal = drop_dominated(A)
    cand = set(candidate_cells(P, (T, D)).tolist())
    for c in maximal:
        assert cand & set(groups[c].tolist())


def test_drop_dominated():
    A = np.array([[1, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=bool)
    np.testing.assert_array_equal(drop_dominated(A), [0, 2])


# likelihood, EM step, optimality gap --------------------------------------------------

def test_log_likelihood_examples():
    assert log_likelihood(np.array([[1, 0]]), [1.0, 0.0]) == 0.0
    assert log_likelihood(DISJOINT, [0.5, 0.5]) == pytest.approx(2 * np.log(0.5))
    assert log_likelihood(DISJOINT, [1.0, 0.0]) == -np.inf


def test_log_likelihood_matches_cell_probabilities():
    rng = np.random.default_rng(5)
    T, D = sample_current_status(rng, 25, 2)
    prob = reduce_problem((T, D))
    w = rng.dirichlet(np.ones(prob.A.shape[1]))
    F = mle_distribution(prob.partition, w, prob.groups)
    P = cell_probabilities_many(F, T)
    direct = np.sum(np.log(P[np.arange(len(T)), orthant_indices(D) - 1]))
    assert log_likelihood(prob.A, w) == pytest.approx(direct, abs=1e-10)


def test_em_fixed_point_and_single_row():
    np.testing.assert_allclose(em_step(DISJOINT, [0.5, 0.5]), [0.5, 0.5])
    A = np.array([[1, 1, 0]], dtype=bool)
    w = em_step(A, [0.2, 0.3, 0.5])
    assert w[:2].sum() == pytest.approx(1.0)
    assert log_likelihood(A, w) == pytest.approx(0.0, abs=1e-15)


def test_optimality_gap_examples():
    assert optimality_gap(DISJOINT, [0.5, 0.5]) == pytest.approx(0.0, abs=1e-15)
    assert optimality_gap(DISJOINT, [0.9, 0.1]) == pytest.approx(4.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_em_ascent(seed):
    rng = np.random.default_rng(seed)
    A = rng.random((10, 6)) < 0.4
    A[~A.any(axis=1), rng.integers(6)] = True
    w = np.full(6, 1 / 6)
    prev = log_likelihood(A, w)
    for _ in range(100):
        w = em_step(A, w)
        assert w.sum() == pytest.approx(1.0)
        cur = log_likelihood(A, w)
        assert cur >= prev - 1e-10
        prev = cur


# solver -----------------------------------------------------------------------------------

def test_em_solve_single_observation():
    res = fit_npmle([Observation((0.5, 0.5), (1, 1))])
    assert res.fit.loglik == pytest.approx(0.0, abs=1e-15)
    assert res.distribution.cdf([[0.5, 0.5]])[0] == pytest.approx(1.0)


def test_em_solve_two_point_example():
    res = fit_npmle([Observation((0.5, 0.5), (1, 1)), Observation((0.5, 0.5), (0, 0))])
    assert res.fit.loglik * 2 == pytest.approx(2 * np.log(0.5), abs=1e-12)
    F = res.distribution
    assert F.cdf([[0.5, 0.5]])[0] == pytest.approx(0.5)
    assert F.cdf([[np.inf, np.inf]])[0] == pytest.approx(1.0)


def test_em_solve_certificate_and_trace():
    rng = np.random.default_rng(12)
    T, D = sample_current_status(rng, 120, 2)
    res = fit_npmle((T, D), tol=1e-8)
    assert res.fit.converged and res.fit.optimality_gap <= 1e-8
    assert np.all(np.diff(res.fit.loglik_trace) >= -1e-10)
    assert res.fit.weights.sum() == pytest.approx(1.0)
    assert np.all((res.fit.weights == 0) | (res.fit.weights >= 1e-14))


def test_em_solve_without_acceleration():
    rng = np.random.default_rng(6)
    A = rng.random((15, 8)) < 0.4
    A[~A.any(axis=1), 0] = True
    plain = em_solve(A, tol=1e-8, accelerate=False, polish=False, max_iter=200_000)
    fast = em_solve(A, tol=1e-8)
    assert plain.converged and fast.converged
    assert np.all(np.diff(plain.loglik_trace) >= -1e-10)
    assert plain.loglik == pytest.approx(fast.loglik, abs=1e-8)


def test_em_solve_reports_non_convergence():
    rng = np.random.default_rng(1)
    T, D = sample_current_status(rng, 60, 2)
    res = fit_npmle((T, D), max_iter=1)
    assert not res.fit.converged
    assert res.fit.optimality_gap > 1e-8


def test_em_solve_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        em_solve(np.array([[0, 0]]), tol=1e-8)
    with pytest.raises(InvalidInputError):
        em_solve(DISJOINT, tol=0.0)


def test_all_zero_indicators():
    T = np.array([[0.3, 0.4], [0.6, 0.2]])
    res = fit_npmle((T, np.zeros((2, 2), int)))
    assert res.fit.loglik == 0.0
    F = res.distribution
    assert F.weights.size == 1
    assert np.all(np.isinf(F.upper))
    np.testing.assert_allclose(F.lower, [[0.6, 0.4]])


def test_scale_invariance():
    rng = np.random.default_rng(9)
    T, D = sample_current_status(rng, 40, 2)
    a = reduce_problem((T, D))
    b = reduce_problem((T * 3.7, D))
    np.testing.assert_array_equal(a.A, b.A)
    fa = em_solve(a.A)
    fb = em_solve(b.A)
    np.testing.assert_array_equal(fa.weights, fb.weights)


# oracle ------------------------------------------------------------------------------------

def test_oracle_examples():
    np.testing.assert_allclose(oracle_solve(DISJOINT), [0.5, 0.5], atol=1e-6)
    np.testing.assert_array_equal(oracle_solve(np.ones((3, 1), dtype=bool)), [1.0])


def test_oracle_size_limits():
    with pytest.raises(InvalidInputError):
        oracle_solve(np.ones((5, 13), dtype=bool))
    with pytest.raises(InvalidInputError):
        oracle_solve(np.ones((51, 3), dtype=bool))


def test_em_matches_oracle_on_small_instances():
    for T, D, prob in small_instances(8, seed=21):
        fit = em_solve(prob.A, tol=1e-8)
        w_or = oracle_solve(prob.A)
        assert fit.optimality_gap <= 1e-8
        assert log_likelihood(prob.A, fit.weights) == pytest.approx(log_likelihood(prob.A, w_or), abs=1e-6)
        Af = prob.A.astype(float)
        assert np.max(np.abs(Af @ fit.weights - Af @ w_or)) <= 1e-5


def test_oracle_fixed_points_have_nonpositive_gap():
    for _, _, prob in small_instances(4, seed=3):
        w = oracle_solve(prob.A)
        assert optimality_gap(prob.A, w) <= 1e-4
        full = np.flatnonzero(w > 1e-6)
        # on the support the EM map fixes the oracle solution
        step = em_step(prob.A, w)
        np.testing.assert_allclose(step[full], w[full], atol=1e-4)


# assembled estimator ---------------------------------------------------------------------

def test_mle_distribution_single_cell():
    P = build_partition(([[0.5]], [[1]]))
    F = mle_distribution(P, np.array([1.0]), [np.array([0])])
    assert F.weights.tolist() == [1.0]
    assert F.cdf([[np.inf]])[0] == 1.0


def test_mle_distribution_uses_smallest_member():
    P = build_partition(([[0.2, 0.2], [0.6, 0.6]], [[1, 1], [1, 1]]))
    F = mle_distribution(P, np.array([1.0]), [np.array([4, 1, 3])])
    lo, hi = P.cell_bounds(P.unravel([1]))
    np.testing.assert_array_equal(F.lower, lo)
    np.testing.assert_array_equal(F.upper, hi)


def test_fitted_distribution_is_valid():
    rng = np.random.default_rng(17)
    T, D = sample_current_status(rng, 80, 3)
    res = fit_npmle((T, D))
    F = res.distribution
    assert F.is_disjoint()
    assert F.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert F.cdf([[np.inf] * 3])[0] == pytest.approx(1.0, abs=1e-12)
    # row probabilities from the distribution equal A w
    P = cell_probabilities_many(F, T)
    np.testing.assert_allclose(P[np.arange(len(T)), orthant_indices(D) - 1], res.fitted_probabilities, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_one_dimensional_reduction(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 200))
    t = np.round(rng.random(n), 2 if seed % 2 else 8)
    delta = (rng.random(n) < t).astype(int)
    res = fit_npmle((t[:, None], delta[:, None]))
    g = gcm_mle((t, delta))
    np.testing.assert_allclose(res.distribution.cdf(g.knots[:, None]), g.values, atol=1e-8)
