"""Word ranking from logistic-regression coefficients averaged over trials."""
from __future__ import annotations

from collections import defaultdict
from typing import Sequence

from ..features import Vocabulary
from ..models.logistic import LogisticModel


def feature_importance(models: Sequence[tuple[LogisticModel, Vocabulary]],
                       k: int = 20) -> list[tuple[str, float]]:
    """Top-k words by mean coefficient across trials.

    A word missing from a trial's vocabulary contributes 0 for that trial.
    Ties are broken alphabetically.
    """
    if not models:
        raise ValueError("need at least one trained logistic model")
    totals: dict[str, float] = defaultdict(float)
    for model, vocab in models:
        if model.dim != len(vocab):
            raise ValueError("model and vocabulary sizes differ")
        for term, coef in zip(vocab.terms, model.weights):
            totals[term] += float(coef)
    n = len(models)
    ranked = sorted(((t, s / n) for t, s in totals.items()), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]
