"""Feed-forward network: linear projection -> ReLU layer -> single logit.

Trained with Adam on mean logistic loss plus L2 weight decay, global-norm
gradient clipping, length-bucketed mini-batches and early stopping on
validation loss.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .base import as_matrix, floats, log_loss, sigmoid

log = logging.getLogger(__name__)

PARAM_NAMES = ("projection", "hidden", "hidden_bias", "output", "output_bias")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    weight_decay: float = 0.0001
    batch_size: int = 32
    max_epochs: int = 40
    patience: int = 5
    grad_clip_norm: float = 5.0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "max_epochs", "patience", "grad_clip_norm"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")


BOW_CONFIG = TrainConfig(max_epochs=40)
EMBED_CONFIG = TrainConfig(max_epochs=10)


@dataclass
class FeedForwardModel:
    """``projection`` is None for precomputed (frozen) embedding input."""
    projection: np.ndarray | None
    hidden: np.ndarray
    hidden_bias: np.ndarray
    output: np.ndarray
    output_bias: float
    pooling: str = "sum"
    family: str = "nn-bow"
    config: TrainConfig = field(default_factory=TrainConfig)
    history: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.projection.shape[0] if self.projection is not None else self.hidden.shape[0]

    @property
    def dim(self) -> int:
        return self.input_dim

    def params(self) -> dict:
        p = {"hidden": self.hidden, "hidden_bias": self.hidden_bias, "output": self.output,
             "output_bias": np.array([self.output_bias])}
        if self.projection is not None:
            p["projection"] = self.projection
        return p

    def set_params(self, p: dict) -> None:
        self.projection = p.get("projection")
        self.hidden = p["hidden"]
        self.hidden_bias = p["hidden_bias"]
        self.output = p["output"]
        self.output_bias = float(np.asarray(p["output_bias"]).ravel()[0])

    def prepare(self, X):
        X = as_matrix(X, self.input_dim)
        return pool(X, self.pooling)

    def decision_function(self, X) -> np.ndarray:
        return forward(self.params(), self.prepare(X))[0]

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    @property
    def hyperparameters(self) -> dict:
        c = self.config
        return {"learning_rate": c.learning_rate, "weight_decay": c.weight_decay,
                "batch_size": c.batch_size, "max_epochs": c.max_epochs, "patience": c.patience,
                "grad_clip_norm": c.grad_clip_norm, "seed": c.seed, "pooling": self.pooling,
                "embed_dim": None if self.projection is None else self.projection.shape[1],
                "hidden_dim": self.hidden.shape[1]}

    def n_parameters(self) -> int:
        return int(sum(np.asarray(v).size for v in self.params().values()))

    def to_json(self) -> dict:
        out = {k: {"shape": list(np.shape(v)), "values": floats(v)} for k, v in self.params().items()}
        out["history"] = self.history
        return out

    @classmethod
    def from_json(cls, params: dict, hyper: dict, family: str) -> "FeedForwardModel":
        arr = {k: np.asarray(v["values"], float).reshape(v["shape"])
               for k, v in params.items() if k in PARAM_NAMES}
        keys = ("learning_rate", "weight_decay", "batch_size", "max_epochs", "patience",
                "grad_clip_norm", "seed")
        config = TrainConfig(**{k: hyper[k] for k in keys if k in hyper})
        return cls(arr.get("projection"), arr["hidden"], arr["hidden_bias"], arr["output"],
                   float(arr["output_bias"][0]), hyper.get("pooling", "sum"), family, config,
                   params.get("history", {}))


def pool(X, pooling: str):
    """Count-weighted sum (identity) or mean over tokens (row-normalised counts)."""
    if pooling == "sum":
        return X
    if pooling != "mean":
        raise ValueError(f"unknown pooling {pooling!r}")
    totals = np.asarray(X.sum(axis=1)).ravel()
    scale = np.where(totals > 0, 1.0 / np.where(totals > 0, totals, 1.0), 0.0)
    if sp.issparse(X):
        return sp.diags(scale) @ X
    return X * scale[:, None]


def forward(p: dict, X):
    z0 = X @ p["projection"] if "projection" in p else X
    z0 = np.asarray(z0)
    a1 = z0 @ p["hidden"] + p["hidden_bias"]
    h = np.maximum(a1, 0.0)
    logits = h @ p["output"] + p["output_bias"][0]
    return logits, (z0, a1, h)


def loss_and_grad(p: dict, X, y: np.ndarray, weight_decay: float = 0.0):
    """Mean logistic loss + weight_decay/2 * ||theta||^2 and its gradient."""
    logits, (z0, a1, h) = forward(p, X)
    n = y.size
    loss = log_loss(y, logits)
    dlogit = (sigmoid(logits) - y) / n
    g = {"output": h.T @ dlogit, "output_bias": np.array([dlogit.sum()])}
    da1 = np.outer(dlogit, p["output"]) * (a1 > 0)
    g["hidden"] = z0.T @ da1
    g["hidden_bias"] = da1.sum(axis=0)
    if "projection" in p:
        dz0 = da1 @ p["hidden"].T
        g["projection"] = np.asarray(X.T @ dz0)
    if weight_decay:
        for k, v in p.items():
            loss += 0.5 * weight_decay * float(np.sum(v * v))
            g[k] = g[k] + weight_decay * v
    return loss, g


def global_norm(g: dict) -> float:
    return float(np.sqrt(sum(float(np.sum(v * v)) for v in g.values())))


def clip_gradients(g: dict, max_norm: float) -> tuple[dict, float]:
    """Rescale so the global norm is at most ``max_norm``; returns (grads, post-clip norm)."""
    norm = global_norm(g)
    if norm > max_norm:
        scale = max_norm / norm
        g = {k: v * scale for k, v in g.items()}
        norm = global_norm(g)
    return g, norm


class EarlyStopper:
    """Tracks the best validation loss; ``step`` returns True when training should stop."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.epoch = 0

    def step(self, val_loss: float) -> bool:
        self.epoch += 1
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = self.epoch
            return False
        return self.epoch - self.best_epoch >= self.patience


def length_batches(lengths: np.ndarray, batch_size: int) -> list[np.ndarray]:
    order = np.argsort(lengths, kind="mergesort")
    return [order[i:i + batch_size] for i in range(0, order.size, batch_size)]


def init_params(rng: np.random.Generator, input_dim: int, embed_dim: int | None,
                hidden_dim: int) -> dict:
    def glorot(fan_in, fan_out):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_in, fan_out))

    p = {}
    width = input_dim
    if embed_dim is not None:
        p["projection"] = glorot(input_dim, embed_dim)
        width = embed_dim
    p["hidden"] = glorot(width, hidden_dim)
    p["hidden_bias"] = np.zeros(hidden_dim)
    p["output"] = glorot(hidden_dim, 1)[:, 0]
    p["output_bias"] = np.zeros(1)
    return p


def train_ffnn(X, y, X_val, y_val, config: TrainConfig = BOW_CONFIG,
               dims: tuple[int | None, int] = (128, 64), lengths=None,
               pooling: str = "sum", family: str = "nn-bow") -> FeedForwardModel:
    """Fit the network; returns the parameters of the best validation epoch.

    ``dims[0] = None`` skips the projection (inputs are already embeddings).
    ``lengths`` are token counts used to bucket batches; defaults to row sums.
    """
    X = pool(as_matrix(X), pooling)
    X_val = pool(as_matrix(X_val, X.shape[1]), pooling)
    y = np.asarray(y, float).ravel()
    y_val = np.asarray(y_val, float).ravel()
    if y.size == 0 or y_val.size == 0:
        raise ValueError("training and validation sets must be non-empty")
    if X.shape[0] != y.size or X_val.shape[0] != y_val.size:
        raise ValueError("feature/label length mismatch")
    if lengths is None:
        lengths = np.asarray(abs(X).sum(axis=1)).ravel()
    lengths = np.asarray(lengths)
    rng = np.random.default_rng(config.seed)
    embed_dim, hidden_dim = dims
    p = init_params(rng, X.shape[1], embed_dim, hidden_dim)
    m = {k: np.zeros_like(v) for k, v in p.items()}
    v = {k: np.zeros_like(val) for k, val in p.items()}
    batches = length_batches(lengths, config.batch_size)
    stopper = EarlyStopper(config.patience)
    best = {k: a.copy() for k, a in p.items()}
    history = {"train_loss": [], "val_loss": [], "max_clipped_norm": []}
    step = 0
    for epoch in range(config.max_epochs):
        epoch_losses = []
        max_norm = 0.0
        for bi in rng.permutation(len(batches)):
            idx = batches[bi]
            loss, g = loss_and_grad(p, X[idx], y[idx], config.weight_decay)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite training loss at epoch {epoch + 1}, "
                                         f"batch {bi}; try a lower learning rate")
            g, norm = clip_gradients(g, config.grad_clip_norm)
            max_norm = max(max_norm, norm)
            step += 1
            for k in p:
                m[k] = config.beta1 * m[k] + (1 - config.beta1) * g[k]
                v[k] = config.beta2 * v[k] + (1 - config.beta2) * g[k] * g[k]
                mhat = m[k] / (1 - config.beta1 ** step)
                vhat = v[k] / (1 - config.beta2 ** step)
                p[k] = p[k] - config.learning_rate * mhat / (np.sqrt(vhat) + config.eps)
            epoch_losses.append(loss)
        val_loss = log_loss(y_val, forward(p, X_val)[0])
        if not np.isfinite(val_loss):
            raise FloatingPointError(f"non-finite validation loss at epoch {epoch + 1}")
        history["train_loss"].append(float(np.mean(epoch_losses)))
        history["val_loss"].append(float(val_loss))
        history["max_clipped_norm"].append(float(max_norm))
        stop = stopper.step(val_loss)
        if stopper.best_epoch == stopper.epoch:
            best = {k: a.copy() for k, a in p.items()}
        if stop:
            break
    history["best_epoch"] = stopper.best_epoch
    log.debug("ffnn stopped after %d epochs (best %d)", stopper.epoch, stopper.best_epoch)
    model = FeedForwardModel(None, best["hidden"], best["hidden_bias"], best["output"],
                             float(best["output_bias"][0]), pooling, family, config, history)
    model.projection = best.get("projection")
    return model
