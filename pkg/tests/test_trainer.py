import math
from dataclasses import replace

import numpy as np
import pytest

from rbmlab import oracle
from rbmlab.data import synth_modes
from rbmlab.errors import StateError, ValidationError
from rbmlab.likelihood import exact_log_z, exact_moments, log_likelihood
from rbmlab.model import RbmModel, SufficientStats
from rbmlab.rng import SeedSpec
from rbmlab.trainer import (TrainConfig, centered_update, checkpoint_ages, exact_gradient, gradient,
                            init_model, init_visible_bias, negative_phase, positive_phase, train)


def test_init_visible_bias_examples():
    data = np.array([[1, 1, 0], [0, 1, 0]] * 50)
    eta = init_visible_bias(data)
    assert eta[0] == pytest.approx(0.0, abs=1e-15)
    assert eta[1] == pytest.approx(math.log(199), abs=1e-12)
    assert eta[2] == pytest.approx(-math.log(199), abs=1e-12)
    # frequency e/(1+e) as closely as 10^6 rows allow
    m = 1_000_000
    ones = round(m * math.e / (1 + math.e))
    col = np.zeros((m, 1), dtype=np.uint8)
    col[:ones] = 1
    assert init_visible_bias(col)[0] == pytest.approx(1.0, abs=1e-5)


def test_positive_phase_zero_model():
    v = np.array([[1, 0, 1], [1, 1, 0], [0, 0, 1]])
    s = positive_phase(RbmModel.zeros(3, 2), v)
    assert np.all(s.h == 0.5)
    assert np.allclose(s.vh, 0.5 * v.mean(axis=0)[:, None])


def test_positive_phase_single_sample_enumeration(tiny_model):
    v = np.array([1, 0, 1, 1, 0])
    s = positive_phase(tiny_model, v)
    assert np.allclose(s.h, oracle.hidden_conditional(tiny_model, v), atol=1e-12)
    dup = positive_phase(tiny_model, np.vstack([v, v, v]))
    assert np.allclose(dup.vh, s.vh) and np.allclose(dup.h, s.h)


def test_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(k=0)
    with pytest.raises(ValidationError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValidationError):
        TrainConfig(scheme="SGD")
    cfg = TrainConfig(seed=3)
    assert TrainConfig.from_summary(cfg.summary()) == cfg


def test_cd1_on_zero_model_gives_coin_moments():
    m = RbmModel.zeros(6, 3)
    mb = np.ones((20_000, 6), dtype=np.uint8)
    stats, chains = negative_phase(m, TrainConfig(scheme="CD", k=1), None, mb)
    assert chains is None
    assert np.all(np.abs(stats.v - 0.5) < 0.02)


def test_pcd_bookkeeping():
    m = RbmModel.random(5, 3, rng=0)
    cfg = TrainConfig(scheme="PCD", k=4)
    mb = np.zeros((10, 5))
    _, p = negative_phase(m, cfg, None, mb, 0)
    start = p.step_counter
    _, p = negative_phase(m, cfg, p, mb, 1)
    _, p = negative_phase(m, cfg, p, mb, 2)
    assert p.step_counter - start == 2 * cfg.k
    with pytest.raises(StateError):
        negative_phase(m, cfg, None, mb, 5)


@pytest.mark.parametrize("scheme", ["Rdm", "PCD"])
def test_long_chains_reach_exact_moments(scheme):
    m = RbmModel.random(5, 3, 0.8, rng=1)
    exact = exact_moments(m)
    n = 400
    cfg = TrainConfig(scheme=scheme, k=10_000, seed=SeedSpec(2))
    stats, _ = negative_phase(m, cfg, None, np.zeros((n, 5)), 0)
    # single-row moments are Bernoulli-like; 3 SEs of a p(1-p)/n variance bound
    se = np.sqrt(0.25 / n)
    assert np.all(np.abs(stats.v - exact.v) < 3 * se)
    assert np.all(np.abs(stats.h - exact.h) < 3 * se)


def test_zero_gradient_keeps_model(tiny_model):
    s = positive_phase(tiny_model, np.eye(5))
    assert centered_update(tiny_model, s, s, 0.1, (np.full(5, 0.3), np.full(3, 0.6))) == tiny_model


def test_zero_offsets_equal_plain_step(tiny_model):
    data = np.random.default_rng(0).integers(0, 2, (6, 5))
    pos, neg = positive_phase(tiny_model, data), exact_moments(tiny_model)
    a = centered_update(tiny_model, pos, neg, 0.05, None)
    b = centered_update(tiny_model, pos, neg, 0.05, (np.zeros(5), np.zeros(3)))
    assert a.allclose(b, rtol=0, atol=0)


def test_exact_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    for nv, nh in ((6, 4), (8, 5), (3, 2)):
        m = RbmModel.random(nv, nh, 0.7, rng=rng)
        data = rng.integers(0, 2, (8, nv))
        g = exact_gradient(m, data)
        fd = oracle.finite_difference_gradient(m, data, eps=1e-5)
        for a, b in zip((g.d_weights, g.d_visible_bias, g.d_hidden_bias), fd):
            assert np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-8)) < 1e-5


def test_plain_step_is_lr_times_gradient(tiny_model):
    data = np.random.default_rng(5).integers(0, 2, (9, 5))
    lr = 0.01
    new = centered_update(tiny_model, positive_phase(tiny_model, data), exact_moments(tiny_model), lr)
    fd = oracle.finite_difference_gradient(tiny_model, data)
    for after, before, g in zip((new.weights, new.visible_bias, new.hidden_bias),
                                (tiny_model.weights, tiny_model.visible_bias, tiny_model.hidden_bias), fd):
        step = after - before
        assert np.allclose(step, lr * g, rtol=1e-6, atol=1e-12)


def test_centered_gradient_identity(tiny_model):
    # the centered step equals the plain gradient in the shifted parameterization
    data = np.random.default_rng(6).integers(0, 2, (7, 5))
    pos, neg = positive_phase(tiny_model, data), exact_moments(tiny_model)
    mu, lam = np.linspace(0.2, 0.7, 5), np.linspace(0.3, 0.6, 3)
    g = gradient(pos, neg, (mu, lam))
    cov = lambda s: s.vh - np.outer(mu, s.h) - np.outer(s.v, lam) + np.outer(mu, lam)
    assert np.allclose(g.d_weights, cov(pos) - cov(neg), atol=1e-14)
    plain = gradient(pos, neg)
    assert np.allclose(g.d_visible_bias, plain.d_visible_bias - g.d_weights @ lam, atol=1e-14)


def test_exact_ascent_is_monotone():
    rng = np.random.default_rng(7)
    m = RbmModel.random(6, 3, 0.3, rng=rng)
    data = rng.integers(0, 2, (10, 6))
    pos_lls = []
    for _ in range(100):
        pos_lls.append(log_likelihood(m, data, exact_log_z(m)))
        m = centered_update(m, positive_phase(m, data), exact_moments(m), 0.05)
    assert np.all(np.diff(pos_lls) >= -1e-12)


def test_checkpoint_schedule():
    assert checkpoint_ages(0) == [0]
    ages = checkpoint_ages(100, 5)
    assert ages == [1, 3, 6, 16, 40, 100]
    big = checkpoint_ages(200_000)
    assert all(b > a for a, b in zip(big, big[1:])) and big[-1] == 200_000


def test_train_zero_updates():
    data = synth_modes(8, 2, 0.1, 10, SeedSpec(0))
    cks = train(data, TrainConfig(n_updates=0, n_hidden=3))
    assert len(cks) == 1 and cks[0].t_age == 0
    assert cks[0].model == init_model(data.samples, TrainConfig(n_hidden=3))


@pytest.mark.parametrize("scheme", ["Rdm", "CD", "PCD"])
@pytest.mark.parametrize("centered", [True, False])
def test_resume_reproduces_run(scheme, centered):
    data = synth_modes(10, 3, 0.1, 20, SeedSpec(1))
    cfg = TrainConfig(scheme=scheme, k=3, learning_rate=0.05, minibatch_size=16, n_updates=60,
                      n_hidden=4, n_checkpoints=6, centered=centered, seed=SeedSpec(9))
    full = train(data, cfg)
    assert [c.t_age for c in full] == checkpoint_ages(60, 6)
    mid = full[2]
    resumed = train(data, cfg, resume=mid)
    assert [c.t_age for c in resumed] == [c.t_age for c in full[3:]]
    assert resumed[-1].model == full[-1].model
    if scheme == "PCD":
        assert np.array_equal(resumed[-1].persistent.visible_states, full[-1].persistent.visible_states)


def test_resume_needs_offsets():
    data = synth_modes(10, 3, 0.1, 20, SeedSpec(1))
    cfg = TrainConfig(n_updates=10, n_hidden=4, n_checkpoints=2, k=2)
    ck = train(data, cfg)[0]
    with pytest.raises(StateError):
        train(data, cfg, resume=replace(ck, offsets=None))


@pytest.mark.slow
def test_rdm_long_chains_train_close_to_exact_ascent():
    # Rdm with chains far longer than the tiny model's mixing time reaches the
    # likelihood of a much longer exact-gradient ascent
    data = synth_modes(6, 4, 0.05, 16, SeedSpec(3))
    x = data.samples.astype(float)
    cfg = TrainConfig(scheme="Rdm", k=100, learning_rate=0.2, minibatch_size=64, n_updates=5000,
                      n_hidden=3, n_checkpoints=1, centered=False, seed=SeedSpec(4))
    m = train(data, cfg)[-1].model
    ll = log_likelihood(m, x, exact_log_z(m))
    best = init_model(data.samples, cfg)
    for _ in range(10_000):
        best = centered_update(best, positive_phase(best, x), exact_moments(best), 0.2)
    ll_best = log_likelihood(best, x, exact_log_z(best))
    assert ll >= ll_best - 0.05 * abs(ll_best)
