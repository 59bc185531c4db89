"""Family registry: hyperparameter grids, training dispatch and JSON artifacts."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boosted import N_STAGES, BoostedModel, train_boosted
from .ffnn import BOW_CONFIG, EMBED_CONFIG, FeedForwardModel, TrainConfig, train_ffnn
from .forest import N_TREES, ForestModel, train_forest
from .logistic import LogisticModel, train_logistic
from .trees import BinnedMatrix

FAMILIES = ("lr", "rf", "gbt", "nn-bow", "nn-embed")
ARTIFACT_VERSION = 1

GRIDS: dict[str, list[dict]] = {
    "lr": [{"C": c, "penalty": pen} for c in (0.001, 0.01, 0.1, 1.0, 2.0, 5.0)
           for pen in ("l1", "l2")],
    "rf": [{"max_depth": d} for d in (10, 50, 100, 500, None)],
    "gbt": [{"learning_rate": lr, "max_depth": d} for lr in (0.01, 0.1, 0.5, 1.0)
            for d in (2, 3, 4)],
    "nn-bow": [{}],
    "nn-embed": [{}],
}

DEFAULT_DIMS = {"nn-bow": (128, 64), "nn-embed": (None, 64)}


@dataclass
class TrialData:
    """Feature matrices for one trial. ``lengths_*`` are report token counts."""
    X_train: object
    y_train: np.ndarray
    X_val: object
    y_val: np.ndarray
    lengths_train: np.ndarray | None = None
    _binned: BinnedMatrix | None = field(default=None, repr=False)

    def binned(self) -> BinnedMatrix:
        if self._binned is None:
            self._binned = BinnedMatrix(self.X_train)
        return self._binned


def train_family(family: str, data: TrialData, params: dict, seed: int = 0):
    if family == "lr":
        return train_logistic(data.X_train, data.y_train, params.get("penalty", "l2"),
                              params.get("C", 1.0), seed)
    if family == "rf":
        return train_forest(data.X_train, data.y_train, params.get("max_depth"),
                            params.get("n_trees", N_TREES), seed,
                            params.get("bootstrap", True), binned=data.binned())
    if family == "gbt":
        return train_boosted(data.X_train, data.y_train, params.get("learning_rate", 0.1),
                             params.get("max_depth", 3), params.get("n_stages", N_STAGES), seed,
                             binned=data.binned())
    if family in ("nn-bow", "nn-embed"):
        base = BOW_CONFIG if family == "nn-bow" else EMBED_CONFIG
        keys = {k: params[k] for k in ("learning_rate", "weight_decay", "batch_size",
                                       "max_epochs", "patience", "grad_clip_norm") if k in params}
        config = TrainConfig(**{**base.__dict__, **keys, "seed": seed})
        default = DEFAULT_DIMS[family]
        dims = (params.get("embed_dim", default[0]), params.get("hidden_dim", default[1]))
        return train_ffnn(data.X_train, data.y_train, data.X_val, data.y_val, config, dims,
                          data.lengths_train, params.get("pooling", "sum"), family)
    raise ValueError(f"unknown model family {family!r}; choose from {FAMILIES}")


def model_from_json(obj: dict):
    family = obj["family"]
    hyper, params = obj["hyperparameters"], obj["parameters"]
    if family == "lr":
        return LogisticModel.from_json(params, hyper)
    if family == "rf":
        return ForestModel.from_json(params, hyper)
    if family == "gbt":
        return BoostedModel.from_json(params, hyper)
    if family in ("nn-bow", "nn-embed"):
        return FeedForwardModel.from_json(params, hyper, family)
    raise ValueError(f"unknown model family {family!r}")


def artifact(model, grid_point: dict | None = None, vocabulary: dict | None = None,
             extra: dict | None = None) -> dict:
    return {"format_version": ARTIFACT_VERSION, "family": model.family,
            "grid_point": grid_point or {}, "hyperparameters": model.hyperparameters,
            "vocabulary": vocabulary, "n_parameters": model.n_parameters(),
            "extra": extra or {}, "parameters": model.to_json()}


def dumps(obj: dict) -> str:
    # repr-based float rendering round-trips every float64 exactly
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def save_model(path, model, grid_point=None, vocabulary=None, extra=None) -> str:
    text = dumps(artifact(model, grid_point, vocabulary, extra))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")
    return hashlib.sha256(text.encode()).hexdigest()


def load_artifact(path) -> dict:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format_version") != ARTIFACT_VERSION or "family" not in obj:
        raise ValueError(f"{path}: not a model artifact")
    return obj


def load_model(path):
    return model_from_json(load_artifact(path))


def predict_proba(model, X) -> np.ndarray:
    return model.predict_proba(X)
