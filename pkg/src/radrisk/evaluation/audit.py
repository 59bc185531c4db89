"""Demographic subgroup audit of accuracy / TPR / TNR at a fixed operating threshold."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..corpus import AGE_BINS, GENDERS, MARITAL, RACES, PatientRecord
from .metrics import DASH, ConfusionCounts, ScoredExample

ATTRIBUTES = {"age": AGE_BINS, "gender": GENDERS, "race": RACES, "marital": MARITAL}
SINGLE_MEMBERSHIP = ("age", "gender", "marital")


def categories_of(patient: PatientRecord, attribute: str) -> frozenset[str]:
    if attribute == "age":
        return frozenset({patient.age_bin})
    if attribute == "gender":
        return frozenset({patient.gender})
    if attribute == "race":
        return frozenset(patient.races)
    if attribute == "marital":
        return frozenset({patient.marital})
    raise KeyError(attribute)


def _index(patients) -> Mapping[str, PatientRecord]:
    return patients if isinstance(patients, Mapping) else {p.patient_id: p for p in patients}


def subgroup_counts(scored: Sequence[ScoredExample], patients,
                    threshold: float) -> dict[tuple[str, str], ConfusionCounts]:
    """Confusion counts per (attribute, category), plus ("all", "all").

    Race categories overlap, so their counts need not add up to the total.
    """
    by_id = _index(patients)
    tallies = {("all", "all"): [0, 0, 0, 0]}
    for attr, cats in ATTRIBUTES.items():
        for c in cats:
            tallies[(attr, c)] = [0, 0, 0, 0]
    for ex in scored:
        pred = ex.score >= threshold
        slot = (0 if ex.label else 1) if pred else (3 if ex.label else 2)  # tp fp tn fn
        patient = by_id[ex.patient_id]
        tallies[("all", "all")][slot] += 1
        for attr in ATTRIBUTES:
            for c in categories_of(patient, attr):
                tallies[(attr, c)][slot] += 1
    return {k: ConfusionCounts(*v) for k, v in tallies.items()}


@dataclass(frozen=True)
class RateSummary:
    values: tuple[float | None, ...]

    @property
    def defined(self) -> list[float]:
        return [v for v in self.values if v is not None]

    @property
    def mean(self) -> float | None:
        d = self.defined
        return float(np.mean(d)) if d else None

    @property
    def std(self) -> float | None:
        d = self.defined
        return float(np.std(d, ddof=1)) if len(d) >= 2 else None

    def formatted(self, digits: int = 3) -> str:
        if self.mean is None:
            return DASH
        std = DASH if self.std is None else f"{self.std:.{digits}f}"
        return f"{self.mean:.{digits}f} ± {std}"


@dataclass(frozen=True)
class AuditRow:
    attribute: str
    category: str
    accuracy: RateSummary
    tpr: RateSummary
    tnr: RateSummary
    counts: tuple[ConfusionCounts, ...]

    @property
    def n_examples(self) -> int:
        return sum(c.total for c in self.counts)


def subgroup_audit(trials: Sequence[tuple[Sequence[ScoredExample], float]],
                   patients) -> list[AuditRow]:
    """Aggregate per-trial subgroup metrics into mean ± std rows.

    ``trials`` holds (scored test examples, threshold) per trial; the threshold is
    normally ``threshold_at_sensitivity(scored, target=0.95)`` for that trial.
    Empty categories are kept, their rates undefined.
    """
    per_trial = [subgroup_counts(s, patients, thr) for s, thr in trials]
    keys = [("all", "all")] + [(a, c) for a, cats in ATTRIBUTES.items() for c in cats]
    rows = []
    for key in keys:
        counts = tuple(t[key] for t in per_trial)
        rows.append(AuditRow(key[0], key[1],
                             RateSummary(tuple(c.accuracy for c in counts)),
                             RateSummary(tuple(c.sensitivity for c in counts)),
                             RateSummary(tuple(c.specificity for c in counts)),
                             counts))
    return rows


AUDIT_HEADER = ("attribute", "category", "n", "accuracy", "tpr", "tnr")


def audit_records(rows: Sequence[AuditRow]) -> list[tuple[str, ...]]:
    return [(r.attribute, r.category, str(r.n_examples), r.accuracy.formatted(),
             r.tpr.formatted(), r.tnr.formatted()) for r in rows]


def render_table(header: Sequence[str], records: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *records)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(str(x).ljust(w) for x, w in zip(rec, widths)) for rec in records]
    return "\n".join(line.rstrip() for line in lines) + "\n"
