import numpy as np
import pytest
from scipy.special import expit

from rbmlab import oracle
from rbmlab.errors import EmptyDatasetError, ValidationError
from rbmlab.model import RbmModel
from rbmlab.rng import SeedSpec
from rbmlab.sampler import (gibbs_step, init_from_dataset, init_from_states, init_random, log_grid,
                            record_trajectory)


def test_init_random_fair_coins():
    m = RbmModel.random(8, 4, rng=0)
    ens = init_random(m, 100_000, SeedSpec(1))
    assert set(np.unique(ens.visible_states)) <= {0, 1}
    assert abs(ens.visible_states.mean() - 0.5) < 0.01
    assert ens.step_counter == 0


def test_init_random_deterministic_and_streams_differ():
    m = RbmModel.random(16, 4, rng=0)
    a = init_random(m, 50, SeedSpec(5))
    b = init_random(m, 50, SeedSpec(5))
    c = init_random(m, 50, SeedSpec(5, 1))
    assert np.array_equal(a.visible_states, b.visible_states)
    assert np.array_equal(a.hidden_states, b.hidden_states)
    assert np.all(np.any(a.visible_states != c.visible_states, axis=1))


def test_init_from_dataset_single_row():
    m = RbmModel.random(6, 3, rng=0)
    row = np.array([[1, 0, 1, 1, 0, 0]])
    ens = init_from_dataset(m, row, 20, SeedSpec(2))
    assert np.all(ens.visible_states == row)


def test_init_from_dataset_uniform_rows():
    m = RbmModel.random(3, 2, rng=0)
    data = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]])
    n = 100_000
    ens = init_from_dataset(m, data, n, SeedSpec(3))
    codes = ens.visible_states @ np.array([4, 2, 1])
    counts = np.array([(codes == c).sum() for c in (0, 4, 2, 1, 7)])
    p = 1 / 5
    assert np.all(np.abs(counts - n * p) < 3 * np.sqrt(n * p * (1 - p)))


def test_init_from_dataset_empty():
    m = RbmModel.random(3, 2, rng=0)
    with pytest.raises(EmptyDatasetError):
        init_from_dataset(m, np.zeros((0, 3)), 5, SeedSpec(0))


def test_zero_model_step_gives_fresh_coins():
    m = RbmModel.zeros(10, 4)
    ens = init_random(m, 20_000, SeedSpec(0))
    before = ens.visible_states.copy()
    gibbs_step(m, ens, 1)
    assert abs(ens.visible_states.mean() - 0.5) < 0.01
    # agreement with the previous state is that of independent coins
    assert abs((ens.visible_states == before).mean() - 0.5) < 0.01
    assert np.all(ens.visible_means == 0.5)


def test_zero_steps_is_identity():
    m = RbmModel.random(5, 3, rng=0)
    ens = init_random(m, 10, SeedSpec(0))
    snap = ens.copy()
    gibbs_step(m, ens, 0)
    assert np.array_equal(ens.visible_states, snap.visible_states) and ens.step_counter == 0


def test_means_are_logistic_of_last_update():
    m = RbmModel.random(7, 4, rng=3)
    ens = init_random(m, 30, SeedSpec(0))
    gibbs_step(m, ens, 5)
    expect = expit(ens.hidden_states @ m.weights.T + m.visible_bias)
    assert np.allclose(ens.visible_means, expect, rtol=1e-14, atol=1e-15)
    assert ens.step_counter == 5


def test_replay_equivalence():
    m = RbmModel.random(9, 5, rng=4)
    a = init_random(m, 40, SeedSpec(8))
    b = a.copy()
    gibbs_step(m, a, 3)
    gibbs_step(m, a, 7)
    gibbs_step(m, b, 10)
    assert np.array_equal(a.visible_states, b.visible_states)
    assert np.array_equal(a.visible_means, b.visible_means)


def test_chains_are_exchangeable():
    m = RbmModel.random(6, 4, rng=5)
    ens = init_random(m, 25, SeedSpec(1))
    perm = np.random.default_rng(0).permutation(25)
    permuted = ens.take(perm)
    gibbs_step(m, ens, 6)
    gibbs_step(m, permuted, 6)
    assert np.array_equal(ens.visible_states[perm], permuted.visible_states)


def test_record_trajectory_points():
    m = RbmModel.random(6, 3, rng=0)
    ens = init_random(m, 4, SeedSpec(0))
    snaps = record_trajectory(m, ens, 100, [1, 10, 100])
    assert [t for t, _ in snaps] == [1, 10, 100]
    assert [s.step_counter for _, s in snaps] == [1, 10, 100]
    # copies, not views
    snaps[0][1].visible_states[:] = 7
    assert ens.visible_states.max() <= 1


def test_record_trajectory_empty_points_advances():
    m = RbmModel.random(6, 3, rng=0)
    ens = init_random(m, 4, SeedSpec(0))
    assert record_trajectory(m, ens, 25, []) == []
    assert ens.step_counter == 25


def test_record_trajectory_matches_direct_run():
    m = RbmModel.random(6, 3, rng=1)
    a = init_random(m, 8, SeedSpec(2))
    b = a.copy()
    snaps = record_trajectory(m, a, 50, [5, 20])
    gibbs_step(m, b, 20)
    assert np.array_equal(snaps[1][1].visible_states, b.visible_states)


def test_record_trajectory_validation():
    m = RbmModel.random(4, 2, rng=0)
    ens = init_random(m, 2, SeedSpec(0))
    with pytest.raises(ValidationError):
        record_trajectory(m, ens, 10, [5, 3])
    with pytest.raises(ValidationError):
        record_trajectory(m, ens, 10, [5, 30])


def test_cd_init_keeps_rows():
    m = RbmModel.random(4, 2, rng=0)
    rows = np.array([[1, 0, 0, 1], [0, 1, 1, 0]])
    assert np.array_equal(init_from_states(m, rows, SeedSpec(0)).visible_states, rows)


def test_log_grid():
    g = log_grid(1000, 30)
    assert g[0] == 1 and g[-1] == 1000
    assert all(b > a for a, b in zip(g, g[1:]))
    assert log_grid(0, 5) == []


def test_stationary_marginals_match_enumeration(tiny_model):
    ens = init_random(tiny_model, 2000, SeedSpec(4))
    gibbs_step(tiny_model, ens, 50)
    acc = np.zeros(tiny_model.n_visible)
    n = 0
    for _ in range(50):
        gibbs_step(tiny_model, ens, 1)
        acc += ens.visible_states.sum(axis=0)
        n += ens.n_chains
    vs, p = oracle.visible_marginal(tiny_model)
    exact = p @ vs
    # successive sweeps are correlated; 4 binomial SEs on the pooled count is generous but safe
    se = np.sqrt(exact * (1 - exact) / n)
    assert np.all(np.abs(acc / n - exact) < 4 * se * np.sqrt(5))
