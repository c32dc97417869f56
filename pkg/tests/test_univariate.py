import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curstat.errors import InvalidInputError
from curstat.univariate import (
    StepDistribution,
    convex_minorant,
    cumulative_diagram,
    gcm_mle,
    log_likelihood_1d,
    pava,
)

from oracles import enumerate_mle, grid_mle, monotone_loglik


def _fit(deltas):
    t = np.arange(1, len(deltas) + 1, dtype=float)
    return gcm_mle((t, np.array(deltas))).values


# cumulative diagram --------------------------------------------------------------

def test_diagram_example():
    assert cumulative_diagram([(1, 0), (2, 1)]).points == [(0, 0), (1, 0), (2, 1)]


def test_diagram_all_zero():
    assert cumulative_diagram([(1, 0), (2, 0), (3, 0)]).points == [(0, 0), (1, 0), (2, 0), (3, 0)]


def test_diagram_sorts_input():
    assert cumulative_diagram([(2, 1), (1, 0)]).points == cumulative_diagram([(1, 0), (2, 1)]).points


def test_diagram_rejects_empty():
    with pytest.raises(InvalidInputError):
        cumulative_diagram([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 10), st.integers(0, 1)), min_size=1, max_size=40))
def test_diagram_invariants(obs):
    diag = cumulative_diagram(obs)
    assert diag.points[0] == (0, 0)
    assert np.all(np.diff(diag.x) == 1)
    assert set(np.diff(diag.y)) <= {0, 1}
    assert np.all(np.diff(diag.t) >= 0)


# gcm_mle examples ----------------------------------------------------------------

@pytest.mark.parametrize("deltas, expected", [
    ((0, 1, 0, 1), (0, 0.5, 0.5, 1)),
    ((0, 0, 1), (0, 0, 1)),
    ((1, 0), (0.5, 0.5)),
    ((1,), (1,)),
    ((1, 1, 0, 0), (0.5, 0.5, 0.5, 0.5)),
])
def test_gcm_examples(deltas, expected):
    np.testing.assert_allclose(_fit(deltas), expected, atol=1e-15)


def test_gcm_examples_match_grid_oracle():
    for deltas in ((0, 1, 0, 1), (1, 0)):
        assert np.max(np.abs(_fit(deltas) - grid_mle(np.array(deltas)))) <= 1 / 200


def test_grid_oracle_agrees_with_enumeration():
    # the dynamic programme is exact on its grid; check it against enumeration
    for n in range(1, 4):
        for deltas in itertools.product((0, 1), repeat=n):
            deltas = np.array(deltas)
            best, _ = enumerate_mle(deltas, 1 / 20)
            dp = grid_mle(deltas, 1 / 20)
            assert monotone_loglik(dp, deltas) == pytest.approx(best, abs=1e-12)


@pytest.mark.parametrize("n", range(1, 7))
def test_gcm_matches_grid_oracle_all_patterns(n):
    for deltas in itertools.product((0, 1), repeat=n):
        fit = _fit(deltas)
        oracle = grid_mle(np.array(deltas))
        assert np.max(np.abs(fit - oracle)) <= 1 / 200 + 1e-12


def test_ties_are_pooled():
    # tied times get one common value regardless of input order
    a = gcm_mle(([1.0, 1.0, 2.0], [0, 1, 1]))
    b = gcm_mle(([1.0, 1.0, 2.0], [1, 0, 1]))
    np.testing.assert_allclose(a.values, [0.5, 0.5, 1.0])
    np.testing.assert_allclose(b.values, a.values)


def test_ties_match_weighted_points():
    rng = np.random.default_rng(2)
    t = rng.integers(0, 5, 60).astype(float)
    delta = (rng.random(60) < t / 5).astype(int)
    fit = gcm_mle((t, delta))
    # pooled version: aggregate ties into weighted points
    u = np.unique(t)
    means = np.array([delta[t == v].mean() for v in u])
    weights = np.array([(t == v).sum() for v in u])
    pooled = pava(means, weights)
    np.testing.assert_allclose(fit(u), pooled, atol=1e-12)


# properties ----------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=30), st.integers(0, 2**32 - 1))
def test_gcm_beats_random_monotone_vectors(deltas, seed):
    deltas = np.array(deltas)
    fit = _fit(deltas)
    assert np.all(np.diff(fit) >= 0) and fit[0] >= 0 and fit[-1] <= 1
    best = log_likelihood_1d(fit, deltas)
    rng = np.random.default_rng(seed)
    cand = np.sort(rng.random((1000, deltas.size)), axis=1)
    for v in cand:
        assert log_likelihood_1d(v, deltas) <= best + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=40))
def test_minorant_touches_diagram_at_block_ends(deltas):
    t = np.arange(len(deltas), dtype=float)
    diag = cumulative_diagram((t, np.array(deltas)))
    H = convex_minorant(diag)
    assert np.all(H <= diag.y + 1e-12)
    assert np.all(np.diff(H, 2) >= -1e-12)  # convex
    slopes = np.diff(H)
    ends = np.flatnonzero(np.abs(np.diff(slopes)) > 1e-9) + 1
    for i in np.concatenate([[0], ends, [len(deltas)]]):
        assert H[i] == pytest.approx(diag.y[i], abs=1e-12)


def test_values_are_block_means():
    fit = _fit((0, 1, 1, 0, 0, 1, 0, 1, 1))
    for v in np.unique(fit):
        assert any(abs(v - p / q) < 1e-15 for q in range(1, 10) for p in range(q + 1))


def test_step_function_convention():
    s = StepDistribution(np.array([1.0, 2.0, 3.0]), np.array([0.0, 0.5, 1.0]))
    np.testing.assert_allclose(s([0.5, 1.0, 1.5, 2.0, 2.9, 3.0, 10.0]), [0, 0, 0, 0.5, 0.5, 1, 1])
    F = s.to_distribution()
    np.testing.assert_allclose(F.cdf(np.array([[0.5], [2.0], [2.5], [3.0], [np.inf]])), [0, 0.5, 0.5, 1, 1])


def test_step_distribution_with_mass_at_infinity():
    s = gcm_mle(([1.0, 2.0], [0, 0]))
    F = s.to_distribution()
    assert F.cdf(np.array([[1e9]]))[0] == 0.0
    assert F.cdf(np.array([[np.inf]]))[0] == 1.0


def test_loglik_zero_log_zero():
    assert log_likelihood_1d([0.0, 1.0], [0, 1]) == 0.0
    assert log_likelihood_1d([0.0], [1]) == -np.inf


def test_invalid_delta():
    with pytest.raises(InvalidInputError):
        gcm_mle(([1.0], [2]))
    with pytest.raises(InvalidInputError):
        gcm_mle(([np.nan], [1]))
