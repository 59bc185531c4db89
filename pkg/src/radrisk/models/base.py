"""Shared helpers for the classifier families."""
from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ..features import SparseCountVector


def as_matrix(X, dim: int | None = None):
    """Coerce feature input to a CSR matrix or a 2-d float array.

    Accepts a CSR/CSC matrix, a dense array (1-d is one row), a single
    SparseCountVector or a sequence of them.
    """
    if isinstance(X, SparseCountVector):
        X = [X]
    if isinstance(X, (list, tuple)) and (not X or isinstance(X[0], SparseCountVector)):
        if not X:
            return sp.csr_matrix((0, dim or 0))
        d = X[0].dimension
        rows, cols, vals = [], [], []
        for i, v in enumerate(X):
            if v.dimension != d:
                raise ValueError(f"dimension mismatch: {v.dimension} != {d}")
            rows.extend([i] * len(v.entries))
            cols.extend(v.entries.keys())
            vals.extend(v.entries.values())
        X = sp.csr_matrix((np.asarray(vals, float), (rows, cols)), shape=(len(X), d))
    elif sp.issparse(X):
        X = sp.csr_matrix(X, dtype=np.float64)
    else:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"dimension mismatch: model expects {dim} features, got {X.shape[1]}")
    return X


def check_binary_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    if y.size < 2 or y.min() == y.max():
        raise ValueError("training labels must contain both classes")
    return y


def sigmoid(z):
    return expit(z)


def log_loss(y: np.ndarray, logits: np.ndarray) -> float:
    """Mean binary cross-entropy computed from logits."""
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


def dense_chunks(X, chunk: int = 2048):
    """Yield (start, dense block) pairs; keeps memory bounded for wide sparse input."""
    for s in range(0, X.shape[0], chunk):
        block = X[s:s + chunk]
        yield s, (block.toarray() if sp.issparse(block) else np.asarray(block))


def floats(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def seed_of(seed) -> Sequence[int] | int:
    return 0 if seed is None else seed
