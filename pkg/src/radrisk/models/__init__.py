"""Classifier families: logistic regression, random forest, boosted trees, feed-forward nets."""
from .boosted import BoostedModel, train_boosted
from .ffnn import FeedForwardModel, TrainConfig, train_ffnn
from .forest import ForestModel, train_forest
from .grid import GridResult, grid_search
from .logistic import LogisticModel, train_logistic
from .registry import (FAMILIES, GRIDS, TrialData, load_model, predict_proba, save_model,
                       train_family)

__all__ = [
    "BoostedModel", "FeedForwardModel", "ForestModel", "LogisticModel", "TrainConfig",
    "GridResult", "TrialData", "FAMILIES", "GRIDS",
    "train_boosted", "train_ffnn", "train_forest", "train_logistic", "train_family",
    "grid_search", "load_model", "save_model", "predict_proba",
]
