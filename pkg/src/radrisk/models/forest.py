"""Random forest of Gini trees with bootstrap resampling and sqrt(d) feature subsets."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import as_matrix, check_binary_labels, dense_chunks
from .trees import BinnedMatrix, Tree, grow_classification_tree

N_TREES = 100


@dataclass
class ForestModel:
    trees: list[Tree]
    dim: int
    max_depth: int | None = None
    seed: int = 0
    bootstrap: bool = True
    family: str = field(default="rf", init=False)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def max_features(self) -> int:
        return max(1, int(np.sqrt(self.dim)))

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X, self.dim)
        out = np.zeros(X.shape[0])
        for s, block in dense_chunks(X):
            acc = np.zeros(block.shape[0])
            for tree in self.trees:
                acc += tree.value[tree.apply_dense(block)]
            out[s:s + block.shape[0]] = acc / len(self.trees)
        return out

    @property
    def hyperparameters(self) -> dict:
        return {"max_depth": self.max_depth, "n_trees": self.n_trees,
                "bootstrap": self.bootstrap, "seed": self.seed}

    def n_parameters(self) -> int:
        return int(sum(t.n_nodes for t in self.trees))

    def to_json(self) -> dict:
        return {"dim": self.dim, "trees": [t.to_nested() for t in self.trees]}

    @classmethod
    def from_json(cls, params: dict, hyper: dict) -> "ForestModel":
        return cls([Tree.from_nested(t) for t in params["trees"]], int(params["dim"]),
                   hyper.get("max_depth"), int(hyper.get("seed", 0)),
                   bool(hyper.get("bootstrap", True)))


def train_forest(X, y, max_depth: int | None = None, n_trees: int = N_TREES, seed: int = 0,
                 bootstrap: bool = True, binned: BinnedMatrix | None = None) -> ForestModel:
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if max_depth is not None and max_depth < 1:
        raise ValueError("max_depth must be positive or None")
    X = as_matrix(X)
    y = check_binary_labels(y)
    n, d = X.shape
    if n != y.size:
        raise ValueError("X and y have different lengths")
    bm = binned if binned is not None else BinnedMatrix(X)
    max_features = max(1, int(np.sqrt(d)))
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        if bootstrap:
            counts = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
        else:
            counts = np.ones(n)
        rows = np.flatnonzero(counts)
        # a bootstrap sample may miss one class; the tree is still grown, as a single leaf
        trees.append(grow_classification_tree(bm, y, rows, counts[rows], max_depth,
                                              max_features, rng))
    return ForestModel(trees, d, max_depth, seed, bootstrap)


def stump_auc_oracle(X, y) -> float:
    """Best training AUC of any single-feature, single-threshold split (exhaustive)."""
    from ..evaluation.metrics import roc_auc

    Xd = X.toarray() if hasattr(X, "toarray") else np.asarray(X)
    best = 0.5
    for j in range(Xd.shape[1]):
        col = Xd[:, j]
        for t in np.unique(col)[:-1]:
            left = col <= t
            if left.all() or not left.any():
                continue
            pl, pr = y[left].mean(), y[~left].mean()
            score = np.where(left, pl, pr)
            best = max(best, roc_auc(score, y))
    return best
