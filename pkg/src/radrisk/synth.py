"""Synthetic cohorts with planted lexical signal, used as ground truth for end-to-end checks.

Background text is drawn from a Zipf distribution over pseudo-words. The
planted signal words share the background weight of one Zipf rank and have
that weight multiplied by ``signal_ratio`` in every victim report dated on or
after the victim's signal onset. Controls and pre-onset victim reports are
background only.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .corpus import (PatientRecord, ReportRecord, bin_age, clean_text, write_patients_csv,
                     write_reports_csv)
from .features import EmbeddingTable, write_embeddings

DEFAULT_SIGNAL_WORDS = ("hematoma", "fracture", "fractures", "swelling", "trauma",
                        "contusion", "laceration", "nondisplaced", "deformity", "wound")

# marginals of the combined IPV-prediction cohort (victims + controls)
AGE_DIST = {"under30": 0.068, "b30_50": 0.320, "b51_65": 0.372, "b66plus": 0.239}
AGE_RANGES = {"under30": (18, 29), "b30_50": (30, 50), "b51_65": (51, 65), "b66plus": (66, 90)}
GENDER_DIST = {"female": 1.0, "male": 0.0}
RACE_DIST = {"black": 0.508, "hispanic": 0.120, "white": 0.100, "other": 0.276}
MARITAL_DIST = {"single": 0.450, "married": 0.361, "other": 0.189}

HEADER_MARKERS = ("FINDINGS:",)
FOOTER_MARKERS = ("END OF REPORT",)
DAYS_PER_YEAR = 365.25


@dataclass(frozen=True)
class SynthConfig:
    n_patients: int = 1000
    ipv_fraction: float = 0.25
    reports_per_patient_mean: float = 5.0
    report_length_mean: float = 40.0
    background_vocab_size: int = 500
    zipf_exponent: float = 1.0
    signal_words: tuple[str, ...] = DEFAULT_SIGNAL_WORDS
    signal_ratio: float = 5.0
    signal_base_rank: int = 50
    injury_rate: float = 0.3
    window_start: date = date(2008, 1, 1)
    window_end: date = date(2018, 12, 31)
    onset_after_start_years: float = 1.0
    onset_before_end_years: float = 2.0
    pre_onset_years: float = 1.0
    entry_mean_years: float = 1.5
    age_dist: dict = field(default_factory=lambda: dict(AGE_DIST))
    gender_dist: dict = field(default_factory=lambda: dict(GENDER_DIST))
    race_dist: dict = field(default_factory=lambda: dict(RACE_DIST))
    marital_dist: dict = field(default_factory=lambda: dict(MARITAL_DIST))
    embedding_dim: int = 0
    seed: int = 0

    def validate(self) -> None:
        if self.n_patients < 2:
            raise ValueError("n_patients must be at least 2")
        if not 0.0 < self.ipv_fraction < 1.0:
            raise ValueError("ipv_fraction must lie in (0, 1)")
        if self.signal_ratio < 1.0:
            raise ValueError("signal_ratio must be >= 1")
        if not 0.0 <= self.injury_rate <= 1.0:
            raise ValueError("injury_rate must lie in [0, 1]")
        if self.reports_per_patient_mean <= 0 or self.report_length_mean < 0:
            raise ValueError("report count and length means must be positive")
        if not 1 <= self.signal_base_rank <= self.background_vocab_size:
            raise ValueError("signal_base_rank must index the background vocabulary")
        if len(set(self.signal_words)) != len(self.signal_words) or not self.signal_words:
            raise ValueError("signal_words must be a non-empty list of distinct words")
        for w in self.signal_words:
            if clean_text(w) != [w]:
                raise ValueError(f"signal word {w!r} is not a clean lowercase token")
        span = (self.window_end - self.window_start).days / DAYS_PER_YEAR
        if span <= 0:
            raise ValueError("observation window is empty")
        if self.onset_after_start_years + self.onset_before_end_years >= span:
            raise ValueError("signal onset range falls outside the observation window")
        for name in ("age_dist", "gender_dist", "race_dist", "marital_dist"):
            dist = getattr(self, name)
            if min(dist.values()) < 0 or sum(dist.values()) <= 0:
                raise ValueError(f"{name} must hold nonnegative weights with positive sum")

    def to_json(self) -> dict:
        d = asdict(self)
        d["window_start"] = self.window_start.isoformat()
        d["window_end"] = self.window_end.isoformat()
        d["signal_words"] = list(self.signal_words)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        for k in ("window_start", "window_end"):
            if isinstance(d.get(k), str):
                d[k] = date.fromisoformat(d[k])
        if "signal_words" in d:
            d["signal_words"] = tuple(d["signal_words"])
        return cls(**d)


@dataclass
class Cohort:
    reports: list[ReportRecord]
    patients: list[PatientRecord]
    ground_truth: dict
    embeddings: EmbeddingTable | None = None

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"reports": out / "reports.csv", "patients": out / "patients.csv",
                 "ground_truth": out / "ground_truth.json"}
        write_reports_csv(paths["reports"], self.reports)
        write_patients_csv(paths["patients"], self.patients)
        paths["ground_truth"].write_text(json.dumps(self.ground_truth, indent=1, sort_keys=True)
                                         + "\n", encoding="utf-8")
        if self.embeddings is not None:
            paths["embeddings"] = out / "embeddings.csv"
            write_embeddings(paths["embeddings"], self.embeddings,
                             [r.report_id for r in self.reports])
        return paths


def background_words(n: int, exclude=()) -> list[str]:
    syllables = ["ba", "ce", "di", "fo", "gu", "ha", "ke", "li", "mo", "nu",
                 "pa", "re", "si", "to", "vu", "we", "xa", "yo", "za", "qi"]
    exclude = set(exclude)
    words = []
    for k in (2, 3, 4):
        for combo in itertools.product(syllables, repeat=k):
            w = "".join(combo)
            if w not in exclude:
                words.append(w)
            if len(words) == n:
                return words
    raise ValueError("background vocabulary too large")


def _categorical(rng, dist: dict) -> str:
    keys = list(dist)
    p = np.array([dist[k] for k in keys], dtype=float)
    return keys[int(rng.choice(len(keys), p=p / p.sum()))]


def _render(words: list[str], rng) -> str:
    """Dress a token list up as report prose (header, sentences, punctuation, footer)."""
    parts = []
    i = 0
    while i < len(words):
        k = int(rng.integers(5, 13))
        sent = words[i:i + k]
        sent[0] = sent[0].capitalize()
        if len(sent) > 4 and rng.random() < 0.3:
            sent[2] = sent[2] + ","
        parts.append(" ".join(sent) + ".")
        i += k
    body = "\n".join(" ".join(parts[j:j + 3]) for j in range(0, len(parts), 3))
    return f"EXAM: RADIOLOGY STUDY\nFINDINGS:\n{body}\nEND OF REPORT\nElectronically signed."


def generate_cohort(config: SynthConfig = SynthConfig()) -> Cohort:
    config.validate()
    rng = np.random.default_rng(config.seed)
    V = config.background_vocab_size
    bg = background_words(V, exclude=config.signal_words)
    zipf = 1.0 / np.arange(1, V + 1) ** config.zipf_exponent
    base_signal = zipf[config.signal_base_rank - 1]
    vocab = bg + list(config.signal_words)
    n_sig = len(config.signal_words)
    w_plain = np.concatenate([zipf, np.full(n_sig, base_signal)])
    w_boost = np.concatenate([zipf, np.full(n_sig, base_signal * config.signal_ratio)])
    p_plain, p_boost = w_plain / w_plain.sum(), w_boost / w_boost.sum()
    signal_set = set(config.signal_words)
    emb_table = None
    emb_vectors = {}
    if config.embedding_dim > 0:
        word_vecs = rng.normal(size=(len(vocab), config.embedding_dim))

    start, end = config.window_start, config.window_end
    span_days = (end - start).days
    patients, reports = [], []
    gt_patients, gt_reports = {}, {}
    for i in range(config.n_patients):
        pid = f"P{i:05d}"
        is_victim = bool(rng.random() < config.ipv_fraction)
        age_bin = _categorical(rng, config.age_dist)
        lo, hi = AGE_RANGES[age_bin]
        age = int(rng.integers(lo, hi + 1))
        assert bin_age(age) == age_bin
        gender = _categorical(rng, config.gender_dist)
        race = _categorical(rng, config.race_dist)
        marital = _categorical(rng, config.marital_dist)
        n_reports = max(1, int(rng.poisson(config.reports_per_patient_mean)))
        onset = entry = None
        if is_victim:
            lo_d = int(config.onset_after_start_years * DAYS_PER_YEAR)
            hi_d = span_days - int(config.onset_before_end_years * DAYS_PER_YEAR)
            onset = start + timedelta(days=int(rng.integers(lo_d, hi_d + 1)))
            lead = int(round(rng.exponential(config.entry_mean_years) * DAYS_PER_YEAR))
            entry = min(onset + timedelta(days=max(lead, 1)), end)
            first_day = max(start, onset - timedelta(days=int(config.pre_onset_years * DAYS_PER_YEAR)))
        else:
            first_day = start
        offsets = rng.integers(0, (end - first_day).days + 1, size=n_reports)
        dates = sorted(first_day + timedelta(days=int(o)) for o in offsets)
        earliest_signal = None
        for k, d in enumerate(dates):
            rid = f"{pid}-R{k:03d}"
            boosted = is_victim and d >= onset
            length = int(rng.poisson(config.report_length_mean)) + 5
            idx = rng.choice(len(vocab), size=length, p=p_boost if boosted else p_plain)
            words = [vocab[j] for j in idx]
            has_signal = any(w in signal_set for w in words)
            injury = None
            if is_victim:
                injury = bool(has_signal and rng.random() < config.injury_rate)
            if boosted and has_signal and earliest_signal is None:
                earliest_signal = d
            reports.append(ReportRecord(rid, pid, d, _render(words, rng), injury_label=injury))
            gt_reports[rid] = {"signal_bearing": boosted, "has_signal_word": has_signal,
                               "injury_label": injury}
            if config.embedding_dim > 0:
                vec = word_vecs[idx].mean(axis=0) + 0.05 * rng.normal(size=config.embedding_dim)
                emb_vectors[rid] = vec
        patients.append(PatientRecord(pid, is_victim, age, gender, frozenset({race}), marital,
                                      entry))
        gt_patients[pid] = {
            "ipv_label": is_victim,
            "entry_date": entry.isoformat() if entry else None,
            "onset_date": onset.isoformat() if onset else None,
            "earliest_signal_date": earliest_signal.isoformat() if earliest_signal else None,
        }
    if config.embedding_dim > 0:
        emb_table = EmbeddingTable(config.embedding_dim, emb_vectors)
    ground_truth = {
        "config": config.to_json(),
        "signal_words": list(config.signal_words),
        "n_patients": config.n_patients,
        "n_victims": sum(p.ipv_label for p in patients),
        "n_reports": len(reports),
        "header_markers": list(HEADER_MARKERS),
        "footer_markers": list(FOOTER_MARKERS),
        "patients": gt_patients,
        "reports": gt_reports,
    }
    return Cohort(reports, patients, ground_truth, emb_table)
