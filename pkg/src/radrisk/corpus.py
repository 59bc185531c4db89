"""Report and patient ingestion, text cleaning, demographics and patient-level splits."""
from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

GENDERS = ("female", "male")
RACES = ("black", "hispanic", "white", "other")
MARITAL = ("single", "married", "other")
AGE_BINS = ("under30", "b30_50", "b51_65", "b66plus")
SPLITS = ("train", "validation", "test")

_NON_WORD = re.compile(r"[^a-z0-9\s]+")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class ReportRecord:
    report_id: str
    patient_id: str
    report_date: date
    raw_text: str
    tokens: tuple[str, ...] = ()
    injury_label: bool | None = None


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    ipv_label: bool
    age_years: int
    gender: str = "female"
    races: frozenset[str] = frozenset({"other"})
    marital: str = "other"
    program_entry_date: date | None = None

    def __post_init__(self):
        if self.age_years < 0:
            raise DataError(f"patient {self.patient_id}: negative age {self.age_years}")
        if self.gender not in GENDERS:
            raise DataError(f"patient {self.patient_id}: unknown gender {self.gender!r}")
        if self.marital not in MARITAL:
            raise DataError(f"patient {self.patient_id}: unknown marital status {self.marital!r}")
        if not self.races:
            object.__setattr__(self, "races", frozenset({"other"}))
        bad = set(self.races) - set(RACES)
        if bad:
            raise DataError(f"patient {self.patient_id}: unknown race(s) {sorted(bad)}")
        if not self.ipv_label and self.program_entry_date is not None:
            raise DataError(f"patient {self.patient_id}: control patient has a program entry date")

    @property
    def age_bin(self) -> str:
        return bin_age(self.age_years)


@dataclass(frozen=True)
class TrialSplit:
    trial_index: int
    seed: int
    assignment: dict[str, str] = field(default_factory=dict)

    def patients_in(self, part: str) -> list[str]:
        return sorted(pid for pid, p in self.assignment.items() if p == part)

    def sizes(self) -> tuple[int, int, int]:
        counts = {s: 0 for s in SPLITS}
        for p in self.assignment.values():
            counts[p] += 1
        return counts["train"], counts["validation"], counts["test"]


# -- cleaning ---------------------------------------------------------------

def clean_text(raw: str, header_markers: Sequence[str] = (),
               footer_markers: Sequence[str] = ()) -> list[str]:
    """Strip header/footer, punctuation and line breaks; lowercase; split on whitespace.

    Text after the last occurrence of any header marker is kept, then cut at the
    first occurrence of any footer marker in what remains. Markers match case-sensitively.
    """
    if not raw:
        return []
    text = raw
    start = -1
    for marker in header_markers:
        if not marker:
            continue
        pos = text.rfind(marker)
        if pos >= 0:
            start = max(start, pos + len(marker))
    if start >= 0:
        text = text[start:]
    cut = len(text)
    for marker in footer_markers:
        if not marker:
            continue
        pos = text.find(marker)
        if 0 <= pos < cut:
            cut = pos
    text = text[:cut].lower()
    # anything that is not an ascii letter/digit counts as punctuation
    text = _NON_WORD.sub(" ", text)
    return text.split()


def clean_reports(reports: Iterable[ReportRecord], header_markers: Sequence[str] = (),
                  footer_markers: Sequence[str] = ()) -> list[ReportRecord]:
    return [replace(r, tokens=tuple(clean_text(r.raw_text, header_markers, footer_markers)))
            for r in reports]


def prune_corpus(reports: Sequence[ReportRecord], patients: Sequence[PatientRecord],
                 min_tokens: int = 3) -> tuple[list[ReportRecord], list[PatientRecord]]:
    """Drop reports with fewer than ``min_tokens`` tokens, then patients left without reports."""
    known = {p.patient_id for p in patients}
    kept = [r for r in reports if len(r.tokens) >= min_tokens and r.patient_id in known]
    with_reports = {r.patient_id for r in kept}
    kept_patients = [p for p in patients if p.patient_id in with_reports]
    labels = {p.ipv_label for p in kept_patients}
    if labels != {True, False}:
        raise DataError("pruned corpus must keep patients of both classes "
                        f"(found labels {sorted(labels)})")
    log.info("pruning kept %d/%d reports, %d/%d patients",
             len(kept), len(reports), len(kept_patients), len(patients))
    return kept, kept_patients


# -- demographics -----------------------------------------------------------

def bin_age(age_years: int) -> str:
    if age_years < 0:
        raise ValueError(f"age must be nonnegative, got {age_years}")
    if age_years < 30:
        return "under30"
    if age_years <= 50:
        return "b30_50"
    if age_years <= 65:
        return "b51_65"
    return "b66plus"


def normalize_gender(value: str) -> str:
    v = value.strip().lower()
    if v in ("f", "female", "woman"):
        return "female"
    if v in ("m", "male", "man"):
        return "male"
    raise DataError(f"unrecognised gender {value!r}")


def normalize_races(value: str) -> frozenset[str]:
    out = set()
    for part in value.split(";"):
        v = part.strip().lower()
        if not v:
            continue
        if v in ("black", "african american", "black or african american"):
            out.add("black")
        elif v in ("hispanic", "latino", "latina", "hispanic or latino"):
            out.add("hispanic")
        elif v == "white":
            out.add("white")
        else:
            out.add("other")
    return frozenset(out or {"other"})


def normalize_marital(value: str) -> str:
    v = value.strip().lower()
    if v in ("single", "never married"):
        return "single"
    if v in ("married", "partner", "domestic partner"):
        return "married"
    return "other"


# -- splits -----------------------------------------------------------------

def split_sizes(n: int, fractions: Sequence[float] = (0.6, 0.2, 0.2)) -> tuple[int, int, int]:
    """Floor each fraction; the remainder goes to train."""
    n_val = math.floor(fractions[1] * n + 1e-9)
    n_test = math.floor(fractions[2] * n + 1e-9)
    return n - n_val - n_test, n_val, n_test


def make_trial_splits(patients: Sequence[PatientRecord],
                      fractions: Sequence[float] = (0.6, 0.2, 0.2),
                      n_trials: int = 5, master_seed: int = 0,
                      check_classes: bool = True) -> list[TrialSplit]:
    if len(patients) < 5:
        raise DataError(f"need at least 5 patients to split, got {len(patients)}")
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ValueError(f"fractions must be three nonnegative values summing to 1: {fractions}")
    ids = sorted(p.patient_id for p in patients)
    if len(set(ids)) != len(ids):
        raise DataError("duplicate patient ids")
    label = {p.patient_id: p.ipv_label for p in patients}
    n_train, n_val, n_test = split_sizes(len(ids), fractions)
    if min(n_train, n_val, n_test) == 0:
        raise DataError(f"split sizes {(n_train, n_val, n_test)} leave an empty part")
    splits = []
    for t in range(n_trials):
        rng = np.random.default_rng([master_seed, t])
        order = rng.permutation(len(ids))
        assignment = {}
        for rank, i in enumerate(order):
            part = "train" if rank < n_train else "validation" if rank < n_train + n_val else "test"
            assignment[ids[i]] = part
        if check_classes:
            test_labels = {label[pid] for pid, part in assignment.items() if part == "test"}
            if len(test_labels) < 2:
                raise DataError(f"trial {t}: test split contains a single class")
        splits.append(TrialSplit(t, master_seed, assignment))
    return splits


def reports_in(reports: Iterable[ReportRecord], split: TrialSplit, part: str) -> list[ReportRecord]:
    return [r for r in reports if split.assignment.get(r.patient_id) == part]


# -- file io ----------------------------------------------------------------

REPORT_FIELDS = ("report_id", "patient_id", "report_date", "text", "injury_label")
PATIENT_FIELDS = ("patient_id", "ipv_label", "program_entry_date", "age", "gender", "races", "marital")


@dataclass
class LoadStats:
    rows: int = 0
    skipped: int = 0
    errors: list[str] = field(default_factory=list)


def _iter_rows(path: Path):
    """Yield (line_number, dict) from a CSV (header required) or JSONL file."""
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    yield lineno, exc
                    continue
                yield lineno, row
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise DataError(f"{path}: missing header row")
            for row in reader:
                yield reader.line_num, row


def _parse_bool(value, name: str, optional: bool = False):
    if value is None or (isinstance(value, str) and value.strip() == ""):
        if optional:
            return None
        raise ValueError(f"missing {name}")
    if isinstance(value, bool):
        return value
    s = str(value).strip().lower()
    if s in ("1", "true"):
        return True
    if s in ("0", "false"):
        return False
    raise ValueError(f"bad {name} value {value!r}")


def _parse_date(value, name: str, optional: bool = False):
    if value is None or (isinstance(value, str) and value.strip() == ""):
        if optional:
            return None
        raise ValueError(f"missing {name}")
    return date.fromisoformat(str(value).strip())


def _load(path, parse_row, strict: bool):
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    stats = LoadStats()
    out = []
    for lineno, row in _iter_rows(path):
        stats.rows += 1
        try:
            if isinstance(row, Exception):
                raise ValueError(str(row))
            out.append(parse_row(row))
        except (ValueError, KeyError, TypeError) as exc:
            msg = f"{path}:{lineno}: {exc}"
            if strict:
                raise DataError(msg) from exc
            stats.skipped += 1
            stats.errors.append(msg)
            log.warning("skipping malformed row %s", msg)
    return out, stats


def _report_from_row(row) -> ReportRecord:
    rid = str(row["report_id"]).strip()
    pid = str(row["patient_id"]).strip()
    if not rid or not pid:
        raise ValueError("empty report_id or patient_id")
    text = row.get("text")
    if text is None:
        raise ValueError("missing text")
    return ReportRecord(rid, pid, _parse_date(row["report_date"], "report_date"), str(text),
                        injury_label=_parse_bool(row.get("injury_label"), "injury_label", True))


def _patient_from_row(row) -> PatientRecord:
    pid = str(row["patient_id"]).strip()
    if not pid:
        raise ValueError("empty patient_id")
    age = int(str(row["age"]).strip())
    races = row.get("races") or ""
    if isinstance(races, list):
        races = ";".join(races)
    return PatientRecord(
        patient_id=pid,
        ipv_label=_parse_bool(row["ipv_label"], "ipv_label"),
        age_years=age,
        gender=normalize_gender(str(row.get("gender") or "female")),
        races=normalize_races(str(races)),
        marital=normalize_marital(str(row.get("marital") or "other")),
        program_entry_date=_parse_date(row.get("program_entry_date"), "program_entry_date", True),
    )


def load_reports(path, strict: bool = True) -> tuple[list[ReportRecord], LoadStats]:
    reports, stats = _load(path, _report_from_row, strict)
    seen = set()
    for r in reports:
        if r.report_id in seen:
            raise DataError(f"{path}: duplicate report_id {r.report_id}")
        seen.add(r.report_id)
    return reports, stats


def load_patients(path, strict: bool = True) -> tuple[list[PatientRecord], LoadStats]:
    patients, stats = _load(path, _patient_from_row, strict)
    seen = set()
    for p in patients:
        if p.patient_id in seen:
            raise DataError(f"{path}: duplicate patient_id {p.patient_id}")
        seen.add(p.patient_id)
    return patients, stats


def write_reports_csv(path, reports: Iterable[ReportRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_FIELDS)
        for r in reports:
            inj = "" if r.injury_label is None else int(r.injury_label)
            w.writerow([r.report_id, r.patient_id, r.report_date.isoformat(), r.raw_text, inj])


def write_patients_csv(path, patients: Iterable[PatientRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PATIENT_FIELDS)
        for p in patients:
            entry = p.program_entry_date.isoformat() if p.program_entry_date else ""
            w.writerow([p.patient_id, int(p.ipv_label), entry, p.age_years, p.gender,
                        ";".join(sorted(p.races)), p.marital])
