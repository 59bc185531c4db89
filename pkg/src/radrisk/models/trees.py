"""Histogram decision trees over binned (mostly sparse) count features.

Each feature's distinct values become bins (quantile-merged past ``max_bins``),
so split search is a cumulative sum over per-node histograms. For integer
count data with fewer than ``max_bins`` distinct values per column the search
is exact: every split a sorted-value scan would consider is considered here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .base import dense_chunks

LEAF = -1


class BinnedMatrix:
    """CSR structure of X with each stored value replaced by its bin code."""

    def __init__(self, X, max_bins: int = 255):
        X = sp.csr_matrix(X, dtype=np.float64, copy=True)
        X.eliminate_zeros()
        X.sort_indices()
        n, d = X.shape
        self.shape = (n, d)
        csc = X.tocsc()
        self.lo: list[np.ndarray] = []
        self.hi: list[np.ndarray] = []
        self.zero_code = np.zeros(d, dtype=np.int64)
        col_codes = np.empty(csc.nnz, dtype=np.int64)
        n_bins = 1
        for j in range(d):
            a, b = csc.indptr[j], csc.indptr[j + 1]
            vals = csc.data[a:b]
            uniq = np.unique(np.append(vals, 0.0) if b - a < n else vals)
            if uniq.size <= max_bins:
                edges = (uniq[:-1] + uniq[1:]) / 2.0
                lo = hi = uniq
            else:
                allv = np.concatenate([vals, np.zeros(n - (b - a))])
                qs = np.quantile(allv, np.linspace(0, 1, max_bins + 1)[1:-1])
                cand = (uniq[:-1] + uniq[1:]) / 2.0
                edges = np.unique(cand[np.clip(np.searchsorted(cand, qs), 0, cand.size - 1)])
                lo = np.concatenate([[-np.inf], edges])
                hi = np.concatenate([edges, [np.inf]])
            self.lo.append(lo)
            self.hi.append(hi)
            self.zero_code[j] = np.searchsorted(edges, 0.0, side="left")
            col_codes[a:b] = np.searchsorted(edges, vals, side="left")
            n_bins = max(n_bins, edges.size + 1)
        self.n_bins = n_bins
        # back to row-major order
        coded = sp.csc_matrix((col_codes + 1, csc.indices, csc.indptr), shape=X.shape).tocsr()
        coded.sort_indices()
        self.indptr = coded.indptr.astype(np.int64)
        self.indices = coded.indices.astype(np.int64)
        self.codes = (coded.data - 1).astype(np.int64)
        self._csc_indptr = csc.indptr.astype(np.int64)
        self._csc_rows = csc.indices.astype(np.int64)
        self._csc_codes = col_codes

    def column_codes(self, j: int) -> np.ndarray:
        col = np.full(self.shape[0], self.zero_code[j], dtype=np.int64)
        a, b = self._csc_indptr[j], self._csc_indptr[j + 1]
        col[self._csc_rows[a:b]] = self._csc_codes[a:b]
        return col

    def histograms(self, rows: np.ndarray, stats: list[np.ndarray]) -> list[np.ndarray]:
        """Per-(feature, bin) sums of each per-row statistic over ``rows``."""
        d, B = self.shape[1], self.n_bins
        feat, code, row_of = self._gather(rows)
        key = feat * B + code
        out = []
        for s in stats:
            h = np.bincount(key, weights=s[row_of], minlength=d * B).reshape(d, B)
            h[np.arange(d), self.zero_code] += s.sum() - h.sum(axis=1)
            out.append(h)
        return out

    def _gather(self, rows: np.ndarray):
        starts = self.indptr[rows]
        lens = self.indptr[rows + 1] - starts
        total = int(lens.sum())
        offsets = np.repeat(starts - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens)
        pos = offsets + np.arange(total)
        return self.indices[pos], self.codes[pos], np.repeat(np.arange(rows.size), lens)

    def sampled_histograms(self, rows: np.ndarray, stats: list[np.ndarray], max_features: int,
                           rng: np.random.Generator):
        """Histograms for a random feature subset that is non-constant on ``rows``.

        Features are drawn in random order; the first ``max_features`` drawn are
        kept (constant ones dropped), drawing past that only until a non-constant
        feature turns up. Returns (feature ids, per-stat (k, n_bins) histograms).
        """
        d, B = self.shape[1], self.n_bins
        n = rows.size
        feat, code, row_of = self._gather(rows)
        cnt = np.bincount(feat, minlength=d)
        s1 = np.bincount(feat, weights=code, minlength=d)
        s2 = np.bincount(feat, weights=code * code, minlength=d)
        # constant: absent everywhere, or present in every row with a single code
        nonconst = (cnt > 0) & ((cnt < n) | (s2 * cnt != s1 * s1))
        order = rng.permutation(d)
        if not nonconst.any():
            return np.zeros(0, dtype=np.int64), []
        nc_order = nonconst[order]
        first = int(np.argmax(nc_order))
        visit = order[:max(max_features, first + 1)]
        feats = visit[nonconst[visit]]
        k = feats.size
        loc = np.full(d, -1, dtype=np.int64)
        loc[feats] = np.arange(k)
        lf = loc[feat]
        sel = lf >= 0
        lf, code, row_of = lf[sel], code[sel], row_of[sel]
        key = lf * B + code
        out = []
        for s in stats:
            sv = s[row_of]
            h = np.bincount(key, weights=sv, minlength=k * B).reshape(k, B)
            h[np.arange(k), self.zero_code[feats]] += s.sum() - np.bincount(lf, weights=sv, minlength=k)
            out.append(h)
        return feats, out

    def threshold(self, j: int, left_bin: int, right_bin: int) -> float:
        return float((self.hi[j][left_bin] + self.lo[j][right_bin]) / 2.0)


@dataclass
class Tree:
    """Flat binary tree; ``feature == LEAF`` marks leaves. ``x <= threshold`` goes left."""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply_dense(self, Xd: np.ndarray) -> np.ndarray:
        node = np.zeros(Xd.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            nd = node[active]
            go_left = Xd[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, X) -> np.ndarray:
        out = np.empty(X.shape[0])
        for s, block in dense_chunks(X):
            out[s:s + block.shape[0]] = self.value[self.apply_dense(block)]
        return out

    def to_nested(self, i: int = 0) -> dict:
        if self.feature[i] == LEAF:
            return {"value": float(self.value[i])}
        return {"feature": int(self.feature[i]), "threshold": float(self.threshold[i]),
                "left": self.to_nested(int(self.left[i])),
                "right": self.to_nested(int(self.right[i]))}

    @classmethod
    def from_nested(cls, obj: dict) -> "Tree":
        feature, threshold, left, right, value = [], [], [], [], []
        stack = [(obj, -1, False)]
        while stack:
            node, parent, is_right = stack.pop()
            i = len(feature)
            if parent >= 0:
                (right if is_right else left)[parent] = i
            leaf = "value" in node
            feature.append(LEAF if leaf else int(node["feature"]))
            threshold.append(0.0 if leaf else float(node["threshold"]))
            left.append(-1)
            right.append(-1)
            value.append(float(node["value"]) if leaf else 0.0)
            if not leaf:
                stack.append((node["right"], i, True))
                stack.append((node["left"], i, False))
        return cls(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                   np.array(value))


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add(self, value: float) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, left: int, right: int):
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right

    def tree(self) -> Tree:
        return Tree(np.array(self.feature, dtype=np.int64), np.array(self.threshold),
                    np.array(self.left, dtype=np.int64), np.array(self.right, dtype=np.int64),
                    np.array(self.value))


def gini(pos: float, total: float) -> float:
    """Gini impurity of a node with ``pos`` positive weight out of ``total``."""
    if total <= 0:
        return 0.0
    q = pos / total
    return 2.0 * q * (1.0 - q)


def _first_valid(score: np.ndarray, valid: np.ndarray):
    """(row, col) of the smallest score among valid cells; ties to the first in C order."""
    masked = np.where(valid, score, np.inf)
    flat = int(np.argmin(masked))
    if not np.isfinite(masked.flat[flat]):
        return None
    return divmod(flat, masked.shape[1])


def _next_nonempty(counts: np.ndarray, b: int) -> int:
    return b + 1 + int(np.argmax(counts[b + 1:] > 0))


def grow_classification_tree(bm: BinnedMatrix, y: np.ndarray, rows: np.ndarray,
                             weights: np.ndarray, max_depth: int | None,
                             max_features: int, rng: np.random.Generator) -> Tree:
    """Gini tree on ``rows`` (weights = bootstrap multiplicities); leaves hold positive fractions.

    Features are visited in a fresh random order per node; the first
    ``max_features`` are evaluated, extended past that only until one
    non-constant feature has been seen.
    """
    b = _Builder()
    w_all = np.zeros(bm.shape[0])
    np.add.at(w_all, rows, weights)
    stack = [(np.unique(rows), 0, b.add(0.0))]
    while stack:
        idx, depth, node = stack.pop()
        w = w_all[idx]
        wy = w * y[idx]
        W, P = w.sum(), wy.sum()
        b.value[node] = P / W
        if P <= 0 or P >= W or W < 2 or (max_depth is not None and depth >= max_depth):
            continue
        feats, hists = bm.sampled_histograms(idx, [w, wy], max_features, rng)
        if feats.size == 0:
            continue
        hw, hp = hists
        cw = np.cumsum(hw, axis=1)[:, :-1]
        cp = np.cumsum(hp, axis=1)[:, :-1]
        rw, rp = W - cw, P - cp
        valid = (cw > 0) & (rw > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            score = 2.0 * cp * (cw - cp) / cw + 2.0 * rp * (rw - rp) / rw
        hit = _first_valid(score, valid)
        if hit is None:
            continue
        k, lb = hit
        f = int(feats[k])
        rb = _next_nonempty(hw[k], lb)
        col = bm.column_codes(f)[idx]
        go_left = col <= lb
        li, ri = b.add(0.0), b.add(0.0)
        b.split(node, f, bm.threshold(f, lb, rb), li, ri)
        stack.append((idx[~go_left], depth + 1, ri))
        stack.append((idx[go_left], depth + 1, li))
    return b.tree()


def grow_regression_tree(bm: BinnedMatrix, residual: np.ndarray, max_depth: int):
    """Least-squares tree on ``residual`` over all rows (friedman-mse split gain).

    Returns the tree (leaf values left at 0) and the leaf index of every row, so
    the caller can set leaf values, e.g. with a Newton step.
    """
    b = _Builder()
    n = bm.shape[0]
    leaf_of = np.zeros(n, dtype=np.int64)
    ones = np.ones(n)
    stack = [(np.arange(n), 0, b.add(0.0))]
    while stack:
        idx, depth, node = stack.pop()
        r = residual[idx]
        leaf_of[idx] = node
        if depth >= max_depth or idx.size < 2 or np.var(r) <= 1e-14 * max(1.0, np.mean(r * r)):
            continue
        hn, hs = bm.histograms(idx, [ones[idx], r])
        N, S = float(idx.size), r.sum()
        cn = np.cumsum(hn, axis=1)[:, :-1]
        cs = np.cumsum(hs, axis=1)[:, :-1]
        rn, rs = N - cn, S - cs
        valid = (cn > 0) & (rn > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = (cs * rn - rs * cn) ** 2 / (N * cn * rn)
        hit = _first_valid(-gain, valid)
        if hit is None:
            continue
        f, lb = hit
        rb = _next_nonempty(hn[f], lb)
        col = bm.column_codes(f)[idx]
        go_left = col <= lb
        li, ri = b.add(0.0), b.add(0.0)
        b.split(node, f, bm.threshold(f, lb, rb), li, ri)
        stack.append((idx[~go_left], depth + 1, ri))
        stack.append((idx[go_left], depth + 1, li))
    return b.tree(), leaf_of
