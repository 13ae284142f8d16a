import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modeconn import nn
from conftest import central_differences, max_relative_error


def test_param_count_small_net():
    assert nn.MLPConfig((2, 3, 2)).param_count == 2 * 3 + 3 + 3 * 2 + 2


def test_param_count_with_batch_norm():
    # hidden layer: W (2x3) + gamma + beta, output: W (3x2) + b
    assert nn.MLPConfig((2, 3, 2), batch_norm=True).param_count == 6 + 3 + 3 + 6 + 2


@pytest.mark.parametrize("sizes", [(2,), (2, 1), (2, 0, 3)])
def test_config_rejects_bad_sizes(sizes):
    with pytest.raises(ValueError):
        nn.MLPConfig(sizes)


def test_init_is_deterministic_and_seed_dependent():
    cfg = nn.MLPConfig((4, 8, 3), batch_norm=True)
    a, b = nn.init_params(cfg, 7), nn.init_params(cfg, 7)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, nn.init_params(cfg, 8))
    layers = cfg.unpack(a)
    assert np.all(layers[0]["gamma"] == 1.0) and np.all(layers[0]["beta"] == 0.0)
    assert np.all(layers[1]["b"] == 0.0)


def test_pack_unpack_roundtrip(rng):
    cfg = nn.MLPConfig((3, 5, 4, 2), batch_norm=True)
    w = rng.standard_normal(cfg.param_count)
    assert np.array_equal(cfg.pack(cfg.unpack(w)), w)
    assert sum(s.size for s in cfg.slots) == cfg.param_count


def test_zero_weights_give_zero_logits(rng):
    cfg = nn.MLPConfig((3, 4, 2))
    X = rng.standard_normal((5, 3))
    assert np.array_equal(nn.forward(np.zeros(cfg.param_count), cfg, X), np.zeros((5, 2)))


def test_hand_computed_forward():
    cfg = nn.MLPConfig((2, 2, 2))
    layers = [
        {"W": [[1.0, -1.0], [0.5, 2.0]], "b": [0.5, -4.0]},
        {"W": [[1.0, 2.0], [3.0, -1.0]], "b": [0.1, 0.2]},
    ]
    w = cfg.pack(layers)
    # hidden pre-activation (2, 3) + (0.5, -4) = (2.5, -1) -> relu (2.5, 0)
    # logits (2.5, 5.0) + (0.1, 0.2)
    np.testing.assert_allclose(nn.forward(w, cfg, [[1.0, 2.0]]), [[2.6, 5.2]], rtol=0, atol=1e-15)


def test_forward_rejects_dimension_mismatch(rng):
    cfg = nn.MLPConfig((3, 4, 2))
    with pytest.raises(ValueError):
        nn.forward(np.zeros(cfg.param_count + 1), cfg, rng.standard_normal((2, 3)))
    with pytest.raises(ValueError):
        nn.forward(np.zeros(cfg.param_count), cfg, rng.standard_normal((2, 4)))


@pytest.mark.parametrize("t", [0.3, 0.5, 2.0])
def test_layer_rescaling_scales_logits(rng, t):
    cfg = nn.MLPConfig((3, 6, 5, 4))
    w = rng.standard_normal(cfg.param_count)
    scaled = []
    for s in cfg.slots:
        block = w[s.offset:s.offset + s.size]
        scaled.append(block * (t if s.name == "W" else t ** (s.layer + 1)))
    X = rng.standard_normal((10, 3))
    np.testing.assert_allclose(nn.forward(np.concatenate(scaled), cfg, X),
                               t**3 * nn.forward(w, cfg, X), rtol=1e-9, atol=1e-12)


def test_uniform_logits_cross_entropy_is_log_c():
    cfg = nn.MLPConfig((2, 3, 5))
    X = np.ones((4, 2))
    assert nn.loss(np.zeros(cfg.param_count), cfg, X, [0, 1, 2, 4]) == pytest.approx(
        math.log(5), abs=1e-15)


def test_duplicated_batch_has_same_loss(rng):
    cfg = nn.MLPConfig((3, 4, 3))
    w = rng.standard_normal(cfg.param_count)
    X = rng.standard_normal((6, 3))
    y = rng.integers(0, 3, 6)
    assert nn.loss(w, cfg, np.vstack([X, X]), np.r_[y, y]) == pytest.approx(
        nn.loss(w, cfg, X, y), rel=1e-14)


def test_l2_term_is_weights_only(rng):
    base = nn.MLPConfig((3, 4, 3), batch_norm=True)
    reg = nn.MLPConfig((3, 4, 3), batch_norm=True, l2_coeff=0.3)
    w = rng.standard_normal(base.param_count)
    X, y = rng.standard_normal((6, 3)), rng.integers(0, 3, 6)
    weights = np.concatenate([layer["W"].ravel() for layer in base.unpack(w)])
    diff = nn.loss(w, reg, X, y) - nn.loss(w, base, X, y)
    assert diff == pytest.approx(0.3 * weights @ weights, rel=1e-12)


def test_empty_batch_rejected():
    cfg = nn.MLPConfig((2, 3, 2))
    with pytest.raises(ValueError):
        nn.loss_and_grad(np.zeros(cfg.param_count), cfg, np.zeros((0, 2)), [])


@pytest.mark.parametrize("batch_norm", [False, True])
@pytest.mark.parametrize("seed", range(3))
def test_gradient_matches_central_differences(batch_norm, seed):
    rng = np.random.default_rng(seed)
    cfg = nn.MLPConfig((2, 4, 3), batch_norm=batch_norm, l2_coeff=0.01)
    w = nn.init_params(cfg, seed) + 0.1 * rng.standard_normal(cfg.param_count)
    X, y = rng.standard_normal((8, 2)), rng.integers(0, 3, 8)
    _, g = nn.loss_and_grad(w, cfg, X, y)
    fd = central_differences(lambda v: nn.loss(v, cfg, X, y), w)
    assert max_relative_error(g, fd) < 1e-5


def test_gradient_with_fixed_stats(rng):
    cfg = nn.MLPConfig((3, 5, 3), batch_norm=True)
    w = nn.init_params(cfg, 0) + 0.1 * rng.standard_normal(cfg.param_count)
    X, y = rng.standard_normal((9, 3)), rng.integers(0, 3, 9)
    stats = nn.bn_recompute_stats(w, cfg, rng.standard_normal((20, 3)))
    _, g = nn.loss_and_grad(w, cfg, X, y, stats)
    fd = central_differences(lambda v: nn.loss(v, cfg, X, y, stats), w)
    assert max_relative_error(g, fd) < 1e-5


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6), st.integers(2, 4))
def test_softmax_rows_sum_to_one(seed, n_hidden, n_classes):
    rng = np.random.default_rng(seed)
    cfg = nn.MLPConfig((3, n_hidden, n_classes))
    w = 5 * rng.standard_normal(cfg.param_count)
    X = 10 * rng.standard_normal((7, 3))
    _, _, p = nn.predict_eval(w, cfg, X, rng.integers(0, n_classes, 7))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, rtol=0, atol=1e-12)


def test_scores_perfect_and_uniform():
    err, nll, _ = nn.scores_from_logits(np.array([[0.0, -800.0], [-800.0, 0.0]]), np.array([0, 1]))
    assert err == 0.0 and nll == 0.0
    err, nll, _ = nn.scores_from_logits(np.zeros((3, 10)), np.array([0, 4, 9]))
    assert nll == pytest.approx(2.302585092994046, abs=1e-12)
    # ties go to the lowest index, so only label 0 counts as correct
    assert err == pytest.approx(2 / 3)


def test_error_rate_matches_recount(rng):
    cfg = nn.MLPConfig((2, 6, 3))
    w = rng.standard_normal(cfg.param_count)
    X, y = rng.standard_normal((50, 2)), rng.integers(0, 3, 50)
    err, _, _ = nn.predict_eval(w, cfg, X, y)
    logits = nn.forward(w, cfg, X)
    wrong = 0
    for row, label in zip(logits, y):
        best = max(range(3), key=lambda k: (row[k], -k))
        wrong += best != label
    assert err == wrong / 50


def test_bn_stats_constant_rows_have_zero_std():
    cfg = nn.MLPConfig((2, 4, 3), batch_norm=True)
    w = nn.init_params(cfg, 0)
    stats = nn.bn_recompute_stats(w, cfg, np.tile([[0.3, -1.2]], (10, 1)))
    assert np.all(stats.stds[0] == 0.0)


def test_bn_stats_match_direct_mean(rng):
    cfg = nn.MLPConfig((3, 5, 4, 2), batch_norm=True)
    w = nn.init_params(cfg, 1) + 0.1 * rng.standard_normal(cfg.param_count)
    X = rng.standard_normal((40, 3))
    stats = nn.bn_recompute_stats(w, cfg, X)
    layers = cfg.unpack(w)
    z1 = X @ layers[0]["W"]
    np.testing.assert_allclose(stats.means[0], z1.mean(axis=0), atol=1e-14)
    np.testing.assert_allclose(stats.stds[0], z1.std(axis=0), atol=1e-14)
    h1 = np.maximum(layers[0]["gamma"] * (z1 - z1.mean(0)) / (z1.std(0) + nn.BN_EPS)
                    + layers[0]["beta"], 0)
    z2 = h1 @ layers[1]["W"]
    np.testing.assert_allclose(stats.means[1], z2.mean(axis=0), atol=1e-13)
    again = nn.bn_recompute_stats(w, cfg, X)
    assert all(np.array_equal(a, b) for a, b in zip(stats.means + stats.stds,
                                                    again.means + again.stds))


def test_bn_stats_rejected_without_bn():
    cfg = nn.MLPConfig((2, 3, 2))
    with pytest.raises(ValueError):
        nn.bn_recompute_stats(np.zeros(cfg.param_count), cfg, np.zeros((3, 2)))


def test_eval_with_recomputed_stats_equals_train_mode_on_same_data(rng):
    cfg = nn.MLPConfig((3, 5, 2), batch_norm=True)
    w = nn.init_params(cfg, 3)
    X = rng.standard_normal((30, 3))
    stats = nn.bn_recompute_stats(w, cfg, X)
    np.testing.assert_allclose(nn.forward(w, cfg, X, stats), nn.forward(w, cfg, X), atol=1e-14)


def test_predict_eval_needs_stats_for_bn():
    cfg = nn.MLPConfig((2, 3, 2), batch_norm=True)
    with pytest.raises(ValueError):
        nn.predict_eval(nn.init_params(cfg, 0), cfg, np.zeros((2, 2)), [0, 1])
