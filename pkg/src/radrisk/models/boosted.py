"""Gradient-boosted regression trees under logistic loss with Newton leaf values."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import as_matrix, check_binary_labels, dense_chunks, log_loss, sigmoid
from .trees import BinnedMatrix, Tree, grow_regression_tree

N_STAGES = 100
HESSIAN_FLOOR = 1e-12


@dataclass
class BoostedModel:
    initial_logit: float
    stages: list[Tree]
    dim: int
    learning_rate: float = 0.1
    max_depth: int = 3
    seed: int = 0
    train_loss: list[float] = field(default_factory=list)
    family: str = field(default="gbt", init=False)

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def decision_function(self, X) -> np.ndarray:
        X = as_matrix(X, self.dim)
        out = np.full(X.shape[0], self.initial_logit)
        for s, block in dense_chunks(X):
            acc = np.zeros(block.shape[0])
            for tree in self.stages:
                acc += tree.value[tree.apply_dense(block)]
            out[s:s + block.shape[0]] += self.learning_rate * acc
        return out

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    @property
    def hyperparameters(self) -> dict:
        return {"learning_rate": self.learning_rate, "max_depth": self.max_depth,
                "n_stages": self.n_stages, "seed": self.seed}

    def n_parameters(self) -> int:
        return 1 + int(sum(t.n_nodes for t in self.stages))

    def to_json(self) -> dict:
        return {"dim": self.dim, "initial_logit": float(self.initial_logit),
                "stages": [t.to_nested() for t in self.stages],
                "train_loss": [float(v) for v in self.train_loss]}

    @classmethod
    def from_json(cls, params: dict, hyper: dict) -> "BoostedModel":
        return cls(float(params["initial_logit"]), [Tree.from_nested(t) for t in params["stages"]],
                   int(params["dim"]), float(hyper["learning_rate"]), int(hyper["max_depth"]),
                   int(hyper.get("seed", 0)), list(params.get("train_loss", [])))


def train_boosted(X, y, learning_rate: float = 0.1, max_depth: int = 3,
                  n_stages: int = N_STAGES, seed: int = 0,
                  binned: BinnedMatrix | None = None) -> BoostedModel:
    """Stagewise fit; ``train_loss[k]`` is the mean training log-loss after k stages.

    Split search is deterministic (features scanned in index order), so ``seed``
    only tags the artifact.
    """
    if not learning_rate > 0:
        raise ValueError("learning_rate must be positive")
    if max_depth < 1 or n_stages < 0:
        raise ValueError("max_depth must be >= 1 and n_stages >= 0")
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    p = y.mean() if y.size else 0.0
    if p <= 0.0 or p >= 1.0:
        raise ValueError(f"training prevalence must lie strictly between 0 and 1, got {p}")
    y = check_binary_labels(y)
    if X.shape[0] != y.size:
        raise ValueError("X and y have different lengths")
    bm = binned if binned is not None else BinnedMatrix(X)
    init = float(np.log(p / (1.0 - p)))
    F = np.full(y.size, init)
    losses = [log_loss(y, F)]
    stages = []
    for _ in range(n_stages):
        prob = sigmoid(F)
        residual = y - prob
        hess = prob * (1.0 - prob)
        tree, leaf_of = grow_regression_tree(bm, residual, max_depth)
        num = np.bincount(leaf_of, weights=residual, minlength=tree.n_nodes)
        den = np.bincount(leaf_of, weights=hess, minlength=tree.n_nodes)
        tree.value = num / np.maximum(den, HESSIAN_FLOOR)
        F += learning_rate * tree.value[leaf_of]
        stages.append(tree)
        losses.append(log_loss(y, F))
    return BoostedModel(init, stages, X.shape[1], float(learning_rate), int(max_depth), seed, losses)
