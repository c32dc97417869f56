import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curstat.errors import InvalidInputError
from curstat.model import (
    DistributionRepr,
    LinearDensity,
    Observation,
    ProductLaw,
    as_arrays,
    cell_probabilities,
    cell_probabilities_many,
    grid_cell_probabilities,
    orthant_delta,
    orthant_index,
    orthant_indices,
    orthant_region,
    read_observations_csv,
    write_observations_csv,
)

from oracles import random_step_distribution


# orthant_index ---------------------------------------------------------------

@pytest.mark.parametrize("delta, k", [((1, 1), 1), ((0, 0), 4), ((0, 1, 1), 2), ((1, 0), 3), ((1,), 1), ((0,), 2)])
def test_orthant_index_examples(delta, k):
    assert orthant_index(delta) == k


@pytest.mark.parametrize("bad", [(2, 0), (1, -1), ()])
def test_orthant_index_rejects_non_binary(bad):
    with pytest.raises(InvalidInputError):
        orthant_index(bad)


@pytest.mark.parametrize("d", range(1, 7))
def test_orthant_index_is_bijection(d):
    patterns = list(itertools.product((0, 1), repeat=d))
    ks = sorted(orthant_index(p) for p in patterns)
    assert ks == list(range(1, 2**d + 1))
    for p in patterns:
        assert orthant_delta(orthant_index(p), d) == p
    assert np.array_equal(orthant_indices(np.array(patterns)), [orthant_index(p) for p in patterns])


# orthant_region --------------------------------------------------------------

def test_orthant_region_examples():
    r1 = orthant_region(1, (0.5, 0.5))
    assert r1.bounds() == [(0.0, 0.5), (0.0, 0.5)]
    r4 = orthant_region(4, (0.5, 0.5))
    assert r4.bounds() == [(0.5, math.inf), (0.5, math.inf)]
    assert str(r4) == "(0.5, inf) x (0.5, inf)"


def test_orthant_region_out_of_range():
    with pytest.raises(InvalidInputError):
        orthant_region(5, (0.5, 0.5))
    with pytest.raises(InvalidInputError):
        orthant_region(0, (0.5,))


def test_orthant_region_tie_counts_as_observed():
    # y_j == t_j means Delta_j = 1
    assert orthant_region(1, (0.5,)).contains((0.5,))
    assert not orthant_region(2, (0.5,)).contains((0.5,))


@settings(max_examples=200, deadline=None)
@given(
    d=st.integers(1, 6),
    seed=st.integers(0, 2**32 - 1),
)
def test_region_membership_reproduces_delta(d, seed):
    rng = np.random.default_rng(seed)
    t = rng.random(d)
    y = rng.random(d) * 1.5
    delta = tuple(int(v) for v in (y <= t))
    k = orthant_index(delta)
    assert orthant_region(k, t).contains(y)
    # and no other region contains y
    assert sum(orthant_region(j, t).contains(y) for j in range(1, 2**d + 1)) == 1


# Observation and arrays --------------------------------------------------------

def test_observation_validation():
    assert Observation((0.2, 0.3), (1, 0)).d == 2
    for t, delta in [((0.1,), (2,)), ((-1.0,), (1,)), ((math.inf,), (0,)), ((0.1, 0.2), (1,)), ((), ())]:
        with pytest.raises(InvalidInputError):
            Observation(t, delta)


def test_as_arrays_mixed_dimensions():
    with pytest.raises(InvalidInputError):
        as_arrays([Observation((0.1,), (1,)), Observation((0.1, 0.2), (1, 0))])


# cell probabilities ------------------------------------------------------------

def test_uniform_quadrants():
    p = cell_probabilities(ProductLaw.uniform(2), (0.5, 0.5))
    np.testing.assert_allclose(p, [0.25] * 4, atol=1e-15)


def test_point_mass_in_first_cell():
    p = cell_probabilities(DistributionRepr.point_mass((0.1, 0.1)), (0.5, 0.5))
    np.testing.assert_array_equal(p, [1, 0, 0, 0])


def test_uniform_3d_against_monte_carlo():
    t = np.array([0.2, 0.4, 0.5])
    p = cell_probabilities(ProductLaw.uniform(3), t)
    assert p[0] == pytest.approx(0.04, abs=1e-15)
    rng = np.random.default_rng(11)
    Y = rng.random((1_000_000, 3))
    K = orthant_indices((Y <= t).astype(int))
    freq = np.bincount(K - 1, minlength=8) / Y.shape[0]
    se = np.sqrt(p * (1 - p) / Y.shape[0])
    assert np.all(np.abs(freq - p) <= 3 * se + 1e-12)


def test_orthant_order_matches_index():
    # F = mass at (0.9, 0.1): y_1 > t_1, y_2 <= t_2 -> delta = (0, 1) -> k = 2
    p = cell_probabilities(DistributionRepr.point_mass((0.9, 0.1)), (0.5, 0.5))
    assert p[orthant_index((0, 1)) - 1] == 1.0


@settings(max_examples=100, deadline=None)
@given(d=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_partition_of_unity(d, seed):
    rng = np.random.default_rng(seed)
    F = random_step_distribution(rng, d)
    T = rng.random((20, d)) * 1.2
    P = cell_probabilities_many(F, T)
    assert np.all(P >= 0) and np.all(P <= 1)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    # each atom lands in the orthant its coordinates dictate
    for t, p in zip(T, P):
        direct = np.zeros(2**d)
        for y, w in zip(F.upper, F.weights):
            direct[orthant_index(tuple(int(v) for v in (y <= t))) - 1] += w
        np.testing.assert_allclose(p, direct, atol=1e-12)


def test_grid_matches_pointwise():
    rng = np.random.default_rng(3)
    F = random_step_distribution(rng, 2, atoms=6)
    axes = [np.linspace(0, 1, 7), np.linspace(0.05, 0.95, 5)]
    G = grid_cell_probabilities(F, axes)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
    np.testing.assert_allclose(G.reshape(-1, 4), cell_probabilities_many(F, mesh), atol=1e-15)


def test_uniform_placement_splits_by_volume():
    F = DistributionRepr([[0.0, 0.0]], [[1.0, 1.0]], [1.0], placement="uniform")
    np.testing.assert_allclose(cell_probabilities(F, (0.25, 0.5)), [0.125, 0.375, 0.125, 0.375], atol=1e-15)


# DistributionRepr --------------------------------------------------------------

def test_distribution_validation():
    with pytest.raises(InvalidInputError):
        DistributionRepr([[0.0]], [[1.0]], [0.9])
    with pytest.raises(InvalidInputError):
        DistributionRepr([[0.5]], [[0.2]], [1.0])
    with pytest.raises(InvalidInputError):
        DistributionRepr([[0.0]], [[np.inf]], [1.0], placement="uniform")


def test_disjointness():
    F = DistributionRepr([[0, 0], [0.5, 0]], [[0.5, 1], [1, 1]], [0.5, 0.5])
    assert F.is_disjoint()
    G = DistributionRepr([[0, 0], [0.4, 0]], [[0.5, 1], [1, 1]], [0.5, 0.5])
    assert not G.is_disjoint()


@settings(max_examples=100, deadline=None)
@given(d=st.integers(1, 3), seed=st.integers(0, 2**32 - 1))
def test_cdf_monotone_and_total_mass(d, seed):
    rng = np.random.default_rng(seed)
    F = random_step_distribution(rng, d)
    x = rng.random((50, d))
    x2 = x + rng.random((50, d)) * 0.3
    assert np.all(F.cdf(x) <= F.cdf(x2) + 1e-15)
    assert F.cdf(np.full((1, d), np.inf))[0] == pytest.approx(1.0, abs=1e-12)


# product laws --------------------------------------------------------------------

@pytest.mark.parametrize("d, c", [(1, 2.0), (2, 2.0), (3, 4.0)])
def test_tilted_density_bounds(d, c):
    law = ProductLaw.tilted(d, c)
    lo, hi = law.density_bounds()
    assert lo == pytest.approx(1 / c)
    assert hi <= c
    rng = np.random.default_rng(0)
    x = rng.random((10_000, d))
    f = law.pdf(x)
    assert f.min() >= lo - 1e-12 and f.max() <= hi + 1e-12


def test_linear_density_ppf_inverts_cdf():
    m = LinearDensity(0.3)
    p = np.linspace(0, 1, 101)
    np.testing.assert_allclose(m.cdf(m.ppf(p)), p, atol=1e-14)


# CSV -----------------------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    T = rng.random((5, 3))
    D = (rng.random((5, 3)) < 0.5).astype(int)
    path = tmp_path / "obs.csv"
    write_observations_csv(path, (T, D))
    assert path.read_text().splitlines()[0] == "t_1,t_2,t_3,delta_1,delta_2,delta_3"
    T2, D2 = read_observations_csv(path)
    np.testing.assert_array_equal(T, T2)
    np.testing.assert_array_equal(D, D2)


@pytest.mark.parametrize("text", [
    "",
    "t_1,delta_2\n0.1,1\n",
    "t_1,delta_1,extra\n0.1,1,3\n",
    "t_1,delta_1\n0.1\n",
    "t_1,delta_1\nabc,1\n",
    "t_1,delta_1\n0.1,2\n",
    "t_1,delta_1\n",
])
def test_csv_rejects_malformed(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(InvalidInputError):
        read_observations_csv(path)
