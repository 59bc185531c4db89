"""L1/L2 penalised logistic regression on count features.

Objective (summed loss, labels in {-1, +1}, intercept unpenalised)::

    sum_i log(1 + exp(-y_i (w.x_i + b))) + (1/C) * P(w)

with P(w) = ||w||_1 or 0.5 ||w||_2^2. Both penalties are solved with an
accelerated proximal-gradient loop (backtracking on the Lipschitz estimate,
gradient-based momentum restart); for L2 the proximal step is the identity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import as_matrix, check_binary_labels, floats, sigmoid

PENALTIES = ("l1", "l2")


@dataclass
class LogisticModel:
    weights: np.ndarray
    intercept: float
    penalty: str = "l2"
    C: float = 1.0
    n_iter: int = 0
    family: str = field(default="lr", init=False)

    @property
    def dim(self) -> int:
        return len(self.weights)

    def decision_function(self, X) -> np.ndarray:
        X = as_matrix(X, self.dim)
        return np.asarray(X @ self.weights).ravel() + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    @property
    def hyperparameters(self) -> dict:
        return {"C": self.C, "penalty": self.penalty}

    def n_parameters(self) -> int:
        return self.dim + 1

    def to_json(self) -> dict:
        return {"weights": floats(self.weights), "intercept": float(self.intercept),
                "n_iter": self.n_iter}

    @classmethod
    def from_json(cls, params: dict, hyper: dict) -> "LogisticModel":
        return cls(np.asarray(params["weights"], float), float(params["intercept"]),
                   hyper["penalty"], float(hyper["C"]), int(params.get("n_iter", 0)))


def _loss_terms(X, y_pm, w, b):
    m = y_pm * (np.asarray(X @ w).ravel() + b)
    return float(np.logaddexp(0.0, -m).sum()), m


def _smooth_grad(X, y_pm, m):
    r = -y_pm * sigmoid(-m)
    return np.asarray(X.T @ r).ravel(), float(r.sum())


def logistic_objective(X, y, w, b, C: float, penalty: str) -> float:
    X = as_matrix(X)
    y_pm = 2.0 * np.asarray(y, float) - 1.0
    loss, _ = _loss_terms(X, y_pm, np.asarray(w, float), float(b))
    if penalty == "l1":
        return loss + np.abs(w).sum() / C
    return loss + 0.5 * float(np.dot(w, w)) / C


def logistic_gradient(X, y, w, b, C: float, penalty: str = "l2"):
    """Gradient of the objective in (w, b); for L1 the penalty contributes sign(w)/C."""
    X = as_matrix(X)
    y_pm = 2.0 * np.asarray(y, float) - 1.0
    w = np.asarray(w, float)
    _, m = _loss_terms(X, y_pm, w, float(b))
    gw, gb = _smooth_grad(X, y_pm, m)
    if penalty == "l2":
        gw = gw + w / C
    else:
        gw = gw + np.sign(w) / C
    return gw, gb


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def train_logistic(X, y, penalty: str = "l2", C: float = 1.0, seed: int | None = 0,
                   tol: float = 1e-8, grad_tol: float = 1e-6,
                   max_iter: int = 1000) -> LogisticModel:
    """Fit by accelerated proximal gradient.

    Stops once the objective moves by less than ``tol`` between passes and the
    proximal-gradient mapping norm is below ``grad_tol``, or after ``max_iter``
    passes. The solver is deterministic, ``seed`` is accepted for interface parity.
    """
    if penalty not in PENALTIES:
        raise ValueError(f"penalty must be one of {PENALTIES}, got {penalty!r}")
    if not C > 0:
        raise ValueError("C must be positive")
    X = as_matrix(X)
    y = check_binary_labels(y)
    if X.shape[0] != y.size:
        raise ValueError("X and y have different lengths")
    y_pm = 2.0 * y - 1.0
    d = X.shape[1]
    lam = 1.0 / C
    l2 = penalty == "l2"

    def smooth(w, b):
        loss, m = _loss_terms(X, y_pm, w, b)
        gw, gb = _smooth_grad(X, y_pm, m)
        if l2:
            loss += 0.5 * lam * float(np.dot(w, w))
            gw = gw + lam * w
        return loss, gw, gb

    def full(w, b, smooth_val):
        return smooth_val if l2 else smooth_val + lam * np.abs(w).sum()

    p = y.mean()
    w = np.zeros(d)
    b = float(np.log(p / (1 - p)))
    f_x, _, _ = smooth(w, b)
    obj = full(w, b, f_x)
    zw, zb = w.copy(), b
    t = 1.0
    L = 1.0
    it = 0
    stalled = 0
    for it in range(1, max_iter + 1):
        f_z, gzw, gzb = smooth(zw, zb)
        while True:
            step = 1.0 / L
            nw = zw - step * gzw
            if not l2:
                nw = soft_threshold(nw, step * lam)
            nb = zb - step * gzb
            dw, db = nw - zw, nb - zb
            f_n, _, _ = smooth(nw, nb)
            quad = f_z + gzw @ dw + gzb * db + 0.5 * L * (dw @ dw + db * db)
            if f_n <= quad + 4 * np.finfo(float).eps * max(1.0, abs(f_z)):
                break
            L *= 2.0
        new_obj = full(nw, nb, f_n)
        mapping = L * np.sqrt(dw @ dw + db * db)
        noise = 8 * np.finfo(float).eps * max(1.0, abs(obj))
        if new_obj > obj + noise:
            if t == 1.0:
                break  # a plain proximal step from the iterate cannot improve: float floor
            # objective went up: drop momentum and retry from the last iterate
            zw, zb, t = w.copy(), b, 1.0
            continue
        # restart momentum when it points against the step just taken
        restart = dw @ (nw - w) + db * (nb - b) < 0
        t_next = 1.0 if restart else (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        beta = 0.0 if restart else (t - 1.0) / t_next
        zw = nw + beta * (nw - w)
        zb = nb + beta * (nb - b)
        w, b, t = nw, nb, t_next
        change = obj - new_obj
        obj = min(obj, new_obj)
        stalled = stalled + 1 if change <= noise else 0
        if (change < tol and mapping < grad_tol) or stalled >= 10:
            break
        L *= 0.95
    if not (np.all(np.isfinite(w)) and np.isfinite(b)):
        raise FloatingPointError("logistic regression diverged")
    return LogisticModel(w, b, penalty, float(C), it)
