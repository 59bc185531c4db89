import numpy as np
import pytest
import scipy.sparse as sp

from radrisk.evaluation.metrics import roc_auc
from radrisk.models.ffnn import (EarlyStopper, FeedForwardModel, TrainConfig, clip_gradients,
                                 forward, global_norm, init_params, length_batches,
                                 loss_and_grad, pool, train_ffnn)

from conftest import random_sparse_counts


def fd_check(p, X, y, wd, h=1e-6):
    """Max relative error between analytic and central-difference gradients."""
    _, g = loss_and_grad(p, X, y, wd)
    worst = 0.0
    for k, v in p.items():
        flat = v.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up, _ = loss_and_grad(p, X, y, wd)
            flat[i] = old - h
            down, _ = loss_and_grad(p, X, y, wd)
            flat[i] = old
            num = (up - down) / (2 * h)
            ana = g[k].reshape(-1)[i]
            worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-6))
    return worst


@pytest.mark.parametrize("embed", [4, None])
def test_gradient_matches_finite_differences(rng, embed):
    for _ in range(5):
        X = random_sparse_counts(rng, 5, 10, 0.5)
        y = (rng.random(5) < 0.5).astype(float)
        p = init_params(rng, 10, embed, 3)
        p["hidden_bias"] = rng.normal(scale=0.5, size=3)
        Xin = X if embed else X.toarray()
        assert fd_check(p, Xin, y, 1e-3) < 1e-4


def test_zero_parameters_predict_one_half():
    m = FeedForwardModel(np.zeros((6, 3)), np.zeros((3, 2)), np.zeros(2), np.zeros(2), 0.0)
    np.testing.assert_array_equal(m.predict_proba(np.ones((4, 6))), 0.5)


def test_clipping_bounds_global_norm(rng):
    g = {"a": rng.normal(size=(3, 4)) * 10, "b": rng.normal(size=5)}
    clipped, norm = clip_gradients(g, 5.0)
    assert norm <= 5.0 + 1e-9
    assert global_norm(clipped) == pytest.approx(5.0)
    np.testing.assert_allclose(clipped["b"] / g["b"], clipped["a"].ravel()[0] / g["a"].ravel()[0])
    small = {"a": np.array([0.1, 0.2])}
    same, _ = clip_gradients(small, 5.0)
    np.testing.assert_array_equal(same["a"], small["a"])


def test_early_stopping_trace():
    stopper = EarlyStopper(patience=5)
    trace = [0.7, 0.6, 0.61, 0.62, 0.63, 0.64, 0.65, 0.66]
    stopped_at = None
    for loss in trace:
        if stopper.step(loss):
            stopped_at = stopper.epoch
            break
    assert stopped_at == 7
    assert stopper.best_epoch == 2


def test_length_batches_sorted_and_complete():
    lengths = np.array([5, 1, 9, 3, 3, 7, 2])
    batches = length_batches(lengths, 3)
    assert [len(b) for b in batches] == [3, 3, 1]
    flat = np.concatenate(batches)
    assert sorted(flat.tolist()) == list(range(7))
    assert np.all(np.diff(lengths[flat]) >= 0)


def test_mean_pooling_rows_sum_to_one(rng):
    X = random_sparse_counts(rng, 6, 5, 0.6)
    P = pool(X, "mean").toarray()
    sums = P.sum(axis=1)
    np.testing.assert_allclose(sums[X.toarray().sum(axis=1) > 0], 1.0)
    with pytest.raises(ValueError):
        pool(X, "max")


def signal_data(rng, n):
    X = random_sparse_counts(rng, n, 20, 0.2)
    y = (np.asarray(X[:, :3].sum(axis=1)).ravel() > 1).astype(float)
    return X, y


def test_training_learns_and_restores_best_epoch(rng):
    X, y = signal_data(rng, 400)
    cfg = TrainConfig(max_epochs=15, patience=3, seed=1, learning_rate=0.01)
    m = train_ffnn(X[:300], y[:300], X[300:], y[300:], cfg, dims=(16, 8))
    h = m.history
    assert roc_auc(m.predict_proba(X[300:]), y[300:]) > 0.9
    assert max(h["max_clipped_norm"]) <= 5.0 + 1e-9
    best = h["best_epoch"]
    assert h["val_loss"][best - 1] == min(h["val_loss"])
    # the returned weights are those of the best epoch
    logits = forward(m.params(), X[300:].tocsr())[0]
    val = np.mean(np.logaddexp(0, logits) - y[300:] * logits)
    assert val == pytest.approx(h["val_loss"][best - 1])


def test_deterministic_and_serializable(rng):
    X, y = signal_data(rng, 120)
    cfg = TrainConfig(max_epochs=4, patience=2, seed=3)
    a = train_ffnn(X[:80], y[:80], X[80:], y[80:], cfg, dims=(8, 4))
    b = train_ffnn(X[:80], y[:80], X[80:], y[80:], cfg, dims=(8, 4))
    np.testing.assert_array_equal(a.predict_proba(X), b.predict_proba(X))
    back = FeedForwardModel.from_json(a.to_json(), a.hyperparameters, "nn-bow")
    np.testing.assert_array_equal(back.predict_proba(X), a.predict_proba(X))


def test_embedding_network_has_no_projection(rng):
    X = rng.normal(size=(60, 5))
    y = (X[:, 0] > 0).astype(float)
    m = train_ffnn(X[:40], y[:40], X[40:], y[40:], TrainConfig(max_epochs=3, patience=1),
                   dims=(None, 4), family="nn-embed")
    assert m.projection is None and m.input_dim == 5
    assert m.n_parameters() == 5 * 4 + 4 + 4 + 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(rng):
    X = sp.csr_matrix(np.full((20, 3), np.inf))
    y = np.tile([0.0, 1.0], 10)
    with pytest.raises(FloatingPointError, match="epoch"):
        train_ffnn(X, y, X, y, TrainConfig(max_epochs=2, patience=1), dims=(2, 2))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(patience=50, max_epochs=10)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        train_ffnn(np.ones((2, 2)), [0, 1], np.ones((0, 2)), [], TrainConfig())
