import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from radrisk.evaluation.metrics import roc_auc
from radrisk.models.boosted import BoostedModel, train_boosted
from radrisk.models.forest import ForestModel, stump_auc_oracle, train_forest
from radrisk.models.trees import (LEAF, BinnedMatrix, Tree, gini, grow_classification_tree,
                                  grow_regression_tree)

from conftest import random_sparse_counts


def weighted_gini_split(Xd, y, j, t):
    left = Xd[:, j] <= t
    nl, nr = left.sum(), (~left).sum()
    return nl * gini(y[left].sum(), nl) + nr * gini(y[~left].sum(), nr)


def all_splits(Xd):
    for j in range(Xd.shape[1]):
        vals = np.unique(Xd[:, j])
        for a, b in zip(vals[:-1], vals[1:]):
            yield j, (a + b) / 2


class TestBinning:
    def test_codes_preserve_order(self, rng):
        X = random_sparse_counts(rng, 50, 7, 0.4)
        bm = BinnedMatrix(X)
        Xd = X.toarray()
        for j in range(7):
            codes = bm.column_codes(j)
            order = np.argsort(Xd[:, j], kind="stable")
            assert np.all(np.diff(codes[order]) >= 0)
            assert np.array_equal(np.unique(codes).size, np.unique(Xd[:, j]).size)

    def test_histograms_sum_over_rows(self, rng):
        X = random_sparse_counts(rng, 40, 5, 0.3)
        bm = BinnedMatrix(X)
        rows = np.arange(0, 40, 3)
        s = rng.random(40)
        (h,) = bm.histograms(rows, [s[rows]])
        for j in range(5):
            codes = bm.column_codes(j)[rows]
            expect = np.bincount(codes, weights=s[rows], minlength=bm.n_bins)
            np.testing.assert_allclose(h[j], expect)

    def test_negative_and_many_values_are_binned(self, rng):
        X = rng.normal(size=(600, 2))
        bm = BinnedMatrix(X, max_bins=32)
        assert bm.n_bins <= 32
        for j in range(2):
            codes = bm.column_codes(j)
            order = np.argsort(X[:, j])
            assert np.all(np.diff(codes[order]) >= 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_root_split_is_the_exhaustive_gini_optimum(seed):
    rng = np.random.default_rng(seed)
    X = random_sparse_counts(rng, 30, 4, 0.5)
    y = (rng.random(30) < 0.4).astype(float)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    bm = BinnedMatrix(X)
    tree = grow_classification_tree(bm, y, np.arange(30), np.ones(30), 1, 4, rng)
    Xd = X.toarray()
    cands = [weighted_gini_split(Xd, y, j, t) for j, t in all_splits(Xd)]
    if tree.feature[0] == LEAF:
        assert not cands or min(cands) >= 30 * gini(y.sum(), 30) - 1e-12
        return
    got = weighted_gini_split(Xd, y, tree.feature[0], tree.threshold[0])
    assert got == pytest.approx(min(cands), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_regression_root_split_maximises_sse_reduction(seed):
    rng = np.random.default_rng(seed)
    X = random_sparse_counts(rng, 30, 4, 0.5)
    r = rng.normal(size=30)
    tree, leaf_of = grow_regression_tree(BinnedMatrix(X), r, 1)
    Xd = X.toarray()

    def sse(v):
        return ((v - v.mean()) ** 2).sum() if v.size else 0.0

    best = max((sse(r) - sse(r[Xd[:, j] <= t]) - sse(r[Xd[:, j] > t]) for j, t in all_splits(Xd)),
               default=0.0)
    j, t = tree.feature[0], tree.threshold[0]
    got = sse(r) - sse(r[Xd[:, j] <= t]) - sse(r[Xd[:, j] > t])
    assert got == pytest.approx(best, rel=1e-9, abs=1e-12)
    np.testing.assert_array_equal(tree.apply_dense(Xd), leaf_of)


def test_unlimited_tree_fits_distinct_rows(rng):
    X = sp.csr_matrix(np.arange(40, dtype=float).reshape(20, 2) % 7 + np.arange(20)[:, None])
    y = (rng.random(20) < 0.5).astype(float)
    y[:2] = [0, 1]
    tree = grow_classification_tree(BinnedMatrix(X), y, np.arange(20), np.ones(20), None, 2, rng)
    np.testing.assert_array_equal(tree.predict(X), y)
    shallow = grow_classification_tree(BinnedMatrix(X), y, np.arange(20), np.ones(20), 2, 2, rng)
    assert shallow.depth() <= 2


def test_nested_round_trip(rng):
    X = random_sparse_counts(rng, 60, 6)
    y = (rng.random(60) < 0.5).astype(float)
    tree = grow_classification_tree(BinnedMatrix(X), y, np.arange(60), np.ones(60), None, 3, rng)
    back = Tree.from_nested(tree.to_nested())
    np.testing.assert_array_equal(back.predict(X), tree.predict(X))
    assert back.depth() == tree.depth()


class TestForest:
    def data(self, rng, n=120, d=16):
        X = random_sparse_counts(rng, n, d, 0.3)
        y = (np.asarray(X[:, 0].todense()).ravel() + rng.normal(scale=0.5, size=n) > 1).astype(float)
        return X, y

    def test_deterministic_by_seed(self, rng):
        X, y = self.data(rng)
        a = train_forest(X, y, n_trees=10, seed=3).predict_proba(X)
        b = train_forest(X, y, n_trees=10, seed=3).predict_proba(X)
        c = train_forest(X, y, n_trees=10, seed=4).predict_proba(X)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        assert np.all((0 <= a) & (a <= 1))

    def test_depth_limit_and_json(self, rng):
        X, y = self.data(rng)
        m = train_forest(X, y, max_depth=3, n_trees=8, seed=1)
        assert max(t.depth() for t in m.trees) <= 3
        back = ForestModel.from_json(m.to_json(), m.hyperparameters)
        np.testing.assert_array_equal(back.predict_proba(X), m.predict_proba(X))
        assert m.max_features == 4

    def test_learns_signal(self, rng):
        X, y = self.data(rng, n=300)
        m = train_forest(X[:200], y[:200], n_trees=30, seed=0)
        assert roc_auc(m.predict_proba(X[200:]), y[200:]) > 0.75

    def test_full_depth_stump_not_worse_than_oracle(self, rng):
        X, y = self.data(rng, n=80, d=4)
        m = train_forest(X, y, max_depth=None, n_trees=20, seed=0)
        assert roc_auc(m.predict_proba(X), y) >= stump_auc_oracle(X, y) - 1e-12

    def test_rejects_bad_arguments(self, rng):
        X, y = self.data(rng, n=20)
        with pytest.raises(ValueError):
            train_forest(X, y, max_depth=0)
        with pytest.raises(ValueError):
            train_forest(X, y, n_trees=0)


class TestBoosted:
    def data(self, rng, n=150, d=8):
        X = random_sparse_counts(rng, n, d, 0.4)
        z = np.asarray(X[:, 0].todense()).ravel() - np.asarray(X[:, 1].todense()).ravel()
        y = (rng.random(n) < 1 / (1 + np.exp(-z))).astype(float)
        return X, y

    def test_zero_stages_predict_prevalence(self, rng):
        X, y = self.data(rng)
        m = train_boosted(X, y, n_stages=0)
        np.testing.assert_allclose(m.predict_proba(X), y.mean())
        assert m.initial_logit == pytest.approx(np.log(y.mean() / (1 - y.mean())))

    def test_training_loss_decreases(self, rng):
        X, y = self.data(rng)
        m = train_boosted(X, y, learning_rate=0.1, max_depth=2, n_stages=40)
        assert len(m.train_loss) == 41
        assert all(b <= a + 1e-12 for a, b in zip(m.train_loss, m.train_loss[1:]))

    def test_first_stage_leaves_are_newton_steps(self, rng):
        X, y = self.data(rng)
        m = train_boosted(X, y, learning_rate=0.5, max_depth=2, n_stages=1)
        p0 = y.mean()
        leaf = m.stages[0].apply_dense(X.toarray())
        for node in np.unique(leaf):
            rows = leaf == node
            expect = (y[rows] - p0).sum() / (rows.sum() * p0 * (1 - p0))
            assert m.stages[0].value[node] == pytest.approx(expect)

    def test_json_round_trip(self, rng):
        X, y = self.data(rng)
        m = train_boosted(X, y, n_stages=5)
        back = BoostedModel.from_json(m.to_json(), m.hyperparameters)
        np.testing.assert_array_equal(back.predict_proba(X), m.predict_proba(X))

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            train_boosted(np.eye(3), [1, 1, 1])

    @pytest.mark.parametrize("lr,depth", [(0.1, 1), (0.5, 3), (1.0, 2)])
    def test_matches_reference_implementation(self, rng, lr, depth):
        sk = pytest.importorskip("sklearn.ensemble")
        X = rng.normal(size=(120, 3))
        y = (X[:, 0] + 0.5 * rng.normal(size=120) > 0).astype(float)
        ref = sk.GradientBoostingClassifier(learning_rate=lr, max_depth=depth, n_estimators=15,
                                            random_state=0).fit(X, y)
        ours = train_boosted(X, y, lr, depth, n_stages=15)
        np.testing.assert_allclose(ours.predict_proba(X), ref.predict_proba(X)[:, 1], atol=1e-8)
