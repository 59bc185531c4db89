"""Hyperparameter selection by validation AUC."""
from __future__ import annotations

import logging
from dataclasses import dataclass

from ..evaluation.metrics import roc_auc
from .registry import GRIDS, TrialData, train_family

log = logging.getLogger(__name__)


class GridPointError(RuntimeError):
    pass


@dataclass
class GridResult:
    best_params: dict
    model: object
    val_auc: float
    table: list[tuple[dict, float]]


def _rf_max_depth(model) -> int:
    return max(t.depth() for t in model.trees)


def grid_search(family: str, data: TrialData, grid: list[dict] | None = None,
                seed: int = 0) -> GridResult:
    """Train every grid point, keep the argmax of validation AUC (first wins ties).

    The chosen model is returned as trained on the train split; it is not refit
    on train+validation.
    """
    grid = list(GRIDS[family] if grid is None else grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    table = []
    best = None
    rf_cache: dict = {}
    for params in grid:
        try:
            model = _train_point(family, data, params, seed, rf_cache)
            auc = roc_auc(model.predict_proba(data.X_val), data.y_val)
        except Exception as exc:
            raise GridPointError(f"{family} grid point {params}: {exc}") from exc
        log.info("%s %s validation AUC %.4f", family, params, auc)
        table.append((params, auc))
        if best is None or auc > best[2]:
            best = (params, model, auc)
    return GridResult(best[0], best[1], best[2], table)


def _train_point(family, data, params, seed, rf_cache):
    if family != "rf":
        return train_family(family, data, params, seed)
    # A forest grown with depth limit D equals the unlimited forest whenever no
    # unlimited tree goes deeper than D (same bootstrap draws, same node order).
    key = tuple(sorted((k, v) for k, v in params.items() if k != "max_depth"))
    if key not in rf_cache:
        unlimited = train_family(family, data, {**params, "max_depth": None}, seed)
        rf_cache[key] = (unlimited, _rf_max_depth(unlimited))
    unlimited, reached = rf_cache[key]
    depth = params.get("max_depth")
    if depth is None or reached <= depth:
        return type(unlimited)(unlimited.trees, unlimited.dim, depth, unlimited.seed,
                               unlimited.bootstrap)
    return train_family(family, data, params, seed)
