"""AUC, operating thresholds, subgroup audits, feature ranking and date-gap analysis."""
from .audit import AuditRow, subgroup_audit, subgroup_counts
from .dategap import DateGapResult, date_gap, date_gap_analysis, pooled_median_gap
from .importance import feature_importance
from .metrics import (ConfusionCounts, ScoredExample, TrialSummary, UndefinedMetricError,
                      confusion, roc_auc, threshold_at_sensitivity, threshold_at_specificity,
                      trial_summary)

__all__ = [
    "AuditRow", "ConfusionCounts", "DateGapResult", "ScoredExample", "TrialSummary",
    "UndefinedMetricError", "confusion", "date_gap", "date_gap_analysis",
    "feature_importance", "pooled_median_gap", "roc_auc", "subgroup_audit", "subgroup_counts",
    "threshold_at_sensitivity", "threshold_at_specificity", "trial_summary",
]
