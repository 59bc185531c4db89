"""End-to-end glue: cleaned corpus -> per-trial features -> trained models -> scored test sets."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import (DataError, PatientRecord, ReportRecord, TrialSplit, clean_reports,
                     load_patients, load_reports, make_trial_splits, prune_corpus)
from .evaluation.metrics import ScoredExample
from .features import EmbeddingTable, Vocabulary, build_vocabulary, count_matrix, load_embeddings
from .models.grid import GridResult, grid_search
from .models.registry import TrialData
from .synth import FOOTER_MARKERS, HEADER_MARKERS

log = logging.getLogger(__name__)

TASKS = ("ipv", "injury")


@dataclass
class CorpusOptions:
    header_markers: Sequence[str] = HEADER_MARKERS
    footer_markers: Sequence[str] = FOOTER_MARKERS
    min_tokens: int = 3
    min_doc_freq: int = 2
    max_vocab: int | None = 20_000
    binary: bool = False
    length_normalize: bool = False
    strict: bool = True


@dataclass
class Corpus:
    reports: list[ReportRecord]
    patients: list[PatientRecord]
    embeddings: EmbeddingTable | None = None
    load_notes: list[str] = field(default_factory=list)

    @property
    def patient_index(self) -> dict[str, PatientRecord]:
        return {p.patient_id: p for p in self.patients}


def prepare_corpus(reports: Sequence[ReportRecord], patients: Sequence[PatientRecord],
                   opts: CorpusOptions = CorpusOptions(),
                   embeddings: EmbeddingTable | None = None) -> Corpus:
    cleaned = clean_reports(reports, opts.header_markers, opts.footer_markers)
    kept, kept_patients = prune_corpus(cleaned, patients, opts.min_tokens)
    if embeddings is not None:
        missing = [r.report_id for r in kept if r.report_id not in embeddings.vectors]
        if missing:
            raise DataError(f"embeddings missing for {len(missing)} report ids: {missing[:20]}")
    return Corpus(kept, kept_patients, embeddings)


def load_corpus(reports_path, patients_path, opts: CorpusOptions = CorpusOptions(),
                embeddings_path=None) -> Corpus:
    reports, rstats = load_reports(reports_path, opts.strict)
    patients, pstats = load_patients(patients_path, opts.strict)
    emb = load_embeddings(embeddings_path) if embeddings_path else None
    corpus = prepare_corpus(reports, patients, opts, emb)
    corpus.load_notes = rstats.errors + pstats.errors
    return corpus


def task_patients(corpus: Corpus, task: str) -> list[PatientRecord]:
    if task == "ipv":
        return corpus.patients
    if task == "injury":
        with_labels = {r.patient_id for r in corpus.reports if r.injury_label is not None}
        return [p for p in corpus.patients if p.patient_id in with_labels]
    raise ValueError(f"unknown task {task!r}; choose from {TASKS}")


def task_reports(corpus: Corpus, task: str) -> list[tuple[ReportRecord, bool]]:
    """(report, label) pairs; IPV labels are broadcast from the patient."""
    if task == "ipv":
        label = {p.patient_id: p.ipv_label for p in corpus.patients}
        return [(r, label[r.patient_id]) for r in corpus.reports]
    if task == "injury":
        pairs = [(r, bool(r.injury_label)) for r in corpus.reports if r.injury_label is not None]
        if not pairs:
            raise DataError("injury task requires reports with injury labels")
        return pairs
    raise ValueError(f"unknown task {task!r}; choose from {TASKS}")


def make_splits(corpus: Corpus, task: str, n_trials: int, seed: int) -> list[TrialSplit]:
    patients = task_patients(corpus, task)
    splits = make_trial_splits(patients, n_trials=n_trials, master_seed=seed,
                               check_classes=(task == "ipv"))
    if task == "injury":
        pairs = task_reports(corpus, task)
        for s in splits:
            for part in ("train", "test"):
                labels = {lab for r, lab in pairs if s.assignment.get(r.patient_id) == part}
                if len(labels) < 2:
                    raise DataError(f"trial {s.trial_index}: injury {part} split has a single class")
    return splits


@dataclass
class TrialFeatures:
    split: TrialSplit
    vocab: Vocabulary | None
    data: TrialData
    X_test: object
    y_test: np.ndarray
    test_reports: list[ReportRecord]


def _parts(pairs, split):
    out = {"train": [], "validation": [], "test": []}
    for r, lab in pairs:
        part = split.assignment.get(r.patient_id)
        if part is not None:
            out[part].append((r, lab))
    return out


def trial_features(corpus: Corpus, split: TrialSplit, task: str, family: str,
                   opts: CorpusOptions = CorpusOptions()) -> TrialFeatures:
    parts = _parts(task_reports(corpus, task), split)
    reps = {k: [r for r, _ in v] for k, v in parts.items()}
    ys = {k: np.array([lab for _, lab in v], dtype=float) for k, v in parts.items()}
    if family == "nn-embed":
        if corpus.embeddings is None:
            raise DataError("the nn-embed family needs --embeddings")
        vocab = None
        mats = {k: corpus.embeddings.matrix([r.report_id for r in v]) for k, v in reps.items()}
    else:
        vocab = build_vocabulary(reps["train"], opts.min_doc_freq, opts.max_vocab,
                                 built_from=f"trial{split.trial_index}:train")
        mats = {k: count_matrix(v, vocab, opts.binary, opts.length_normalize)
                for k, v in reps.items()}
    lengths = np.array([len(r.tokens) for r in reps["train"]])
    data = TrialData(mats["train"], ys["train"], mats["validation"], ys["validation"], lengths)
    return TrialFeatures(split, vocab, data, mats["test"], ys["test"], reps["test"])


def score_reports(model, X, reports: Sequence[ReportRecord], labels, part: str = "test"
                  ) -> list[ScoredExample]:
    scores = model.predict_proba(X) if len(reports) else np.zeros(0)
    return [ScoredExample(r.report_id, r.patient_id, float(s), bool(lab), r.report_date, part)
            for r, s, lab in zip(reports, scores, labels)]


def features_for(corpus: Corpus, split: TrialSplit, task: str, family: str, vocab,
                 opts: CorpusOptions = CorpusOptions(), part: str = "test"):
    """Features of one split part under an existing vocabulary (or the embedding table)."""
    pairs = _parts(task_reports(corpus, task), split)[part]
    reps = [r for r, _ in pairs]
    labels = np.array([lab for _, lab in pairs], dtype=float)
    if family == "nn-embed":
        if corpus.embeddings is None:
            raise DataError("the nn-embed family needs --embeddings")
        X = corpus.embeddings.matrix([r.report_id for r in reps])
    else:
        X = count_matrix(reps, vocab, opts.binary, opts.length_normalize)
    return X, labels, reps


@dataclass
class TrialRun:
    trial_index: int
    family: str
    result: GridResult
    vocab: Vocabulary | None
    scored: list[ScoredExample]


def run_trial(corpus: Corpus, split: TrialSplit, task: str, family: str,
              opts: CorpusOptions = CorpusOptions(), grid: list[dict] | None = None,
              seed: int = 0) -> TrialRun:
    tf = trial_features(corpus, split, task, family, opts)
    result = grid_search(family, tf.data, grid, seed)
    scored = score_reports(result.model, tf.X_test, tf.test_reports, tf.y_test)
    return TrialRun(split.trial_index, family, result, tf.vocab, scored)


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Model seed for one trial, derived from the master seed."""
    return int(np.random.SeedSequence([master_seed, trial_index, 1]).generate_state(1)[0])
