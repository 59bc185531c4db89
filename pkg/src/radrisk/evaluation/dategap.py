"""Report-program date gap: how long before program entry a victim is first flagged."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from datetime import date
from typing import Mapping, Sequence

import numpy as np

from ..corpus import DataError, PatientRecord
from .metrics import ScoredExample, threshold_at_specificity

DAYS_PER_YEAR = 365.25


def date_gap(report_date: date, entry_date: date) -> float:
    """Signed years from program entry to the report; negative = report came first."""
    return (report_date - entry_date).days / DAYS_PER_YEAR


@dataclass(frozen=True)
class VictimGap:
    patient_id: str
    patient_score: float
    earliest_possible_gap: float
    earliest_predicted_gap: float | None
    earliest_predicted_report: str | None

    @property
    def detected(self) -> bool:
        return self.earliest_predicted_gap is not None


@dataclass(frozen=True)
class DateGapResult:
    threshold: float
    victims: tuple[VictimGap, ...]
    patient_sensitivity: float
    patient_specificity: float
    report_points: tuple[tuple[str, float, float], ...]

    @property
    def detected(self) -> list[VictimGap]:
        return [v for v in self.victims if v.detected]

    @property
    def median_gap_years(self) -> float | None:
        """Median lead time (years before entry) over detected victims."""
        gaps = [v.earliest_predicted_gap for v in self.detected]
        return float(-np.median(gaps)) if gaps else None

    @property
    def median_possible_gap_years(self) -> float | None:
        gaps = [v.earliest_possible_gap for v in self.victims]
        return float(-np.median(gaps)) if gaps else None


def patient_scores(scored: Sequence[ScoredExample]) -> dict[str, float]:
    """Patient score = maximum report score."""
    out: dict[str, float] = {}
    for ex in scored:
        out[ex.patient_id] = max(out.get(ex.patient_id, -np.inf), ex.score)
    return out


def date_gap_analysis(scored: Sequence[ScoredExample], patients,
                      target_specificity: float = 0.95) -> DateGapResult:
    """Threshold patient-level max scores at the target specificity, then date victims' first hit.

    ``scored`` holds every test report (victims and controls, any date
    relative to entry). A victim is detected when their patient score clears the
    threshold; the earliest predicted gap is that of their earliest-dated report
    scoring at or above the threshold.
    """
    by_id: Mapping[str, PatientRecord] = (patients if isinstance(patients, Mapping)
                                          else {p.patient_id: p for p in patients})
    per_patient: dict[str, list[ScoredExample]] = defaultdict(list)
    for ex in scored:
        per_patient[ex.patient_id].append(ex)
    pscore = patient_scores(scored)
    ids = sorted(per_patient)
    labels = [by_id[pid].ipv_label for pid in ids]
    for pid, lab in zip(ids, labels):
        if lab and by_id[pid].program_entry_date is None:
            raise DataError(f"IPV patient {pid} has no program entry date")
    scores = [pscore[pid] for pid in ids]
    thr = threshold_at_specificity(scores, labels, target_specificity)
    victims = []
    points = []
    n_neg = sum(1 for lab in labels if not lab)
    tn = sum(1 for s, lab in zip(scores, labels) if not lab and s < thr)
    for pid, lab in zip(ids, labels):
        if not lab:
            continue
        entry = by_id[pid].program_entry_date
        reports = sorted(per_patient[pid], key=lambda e: (e.report_date, e.report_id))
        for ex in reports:
            points.append((ex.report_id, date_gap(ex.report_date, entry), ex.score))
        hits = [ex for ex in reports if ex.score >= thr]
        first = hits[0] if hits else None
        victims.append(VictimGap(
            pid, pscore[pid], date_gap(reports[0].report_date, entry),
            date_gap(first.report_date, entry) if first else None,
            first.report_id if first else None))
    n_pos = len(victims)
    sens = sum(v.detected for v in victims) / n_pos if n_pos else float("nan")
    spec = tn / n_neg if n_neg else float("nan")
    return DateGapResult(thr, tuple(victims), sens, spec, tuple(points))


def pooled_median_gap(results: Sequence[DateGapResult]) -> float | None:
    """Median lead time over detected victims pooled across trials."""
    gaps = [v.earliest_predicted_gap for r in results for v in r.detected]
    return float(-np.median(gaps)) if gaps else None
