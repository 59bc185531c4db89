"""Vocabularies, bag-of-words count vectors and precomputed report embeddings."""
from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import DataError, ReportRecord


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    min_doc_freq: int = 2
    max_size: int | None = 20_000
    built_from: str = ""
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})
        if len(self.index) != len(self.terms):
            raise ValueError("vocabulary terms must be unique")

    def __len__(self):
        return len(self.terms)

    def to_json(self) -> dict:
        return {"terms": list(self.terms), "min_doc_freq": self.min_doc_freq,
                "max_size": self.max_size, "built_from": self.built_from}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        return cls(tuple(obj["terms"]), obj.get("min_doc_freq", 2), obj.get("max_size"),
                   obj.get("built_from", ""))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class SparseCountVector:
    dimension: int
    entries: dict[int, float]


def document_frequencies(docs: Iterable[Sequence[str]]) -> Counter:
    df: Counter = Counter()
    for tokens in docs:
        df.update(set(tokens))
    return df


def build_vocabulary(train_reports: Sequence[ReportRecord], min_doc_freq: int = 2,
                     max_size: int | None = 20_000, built_from: str = "") -> Vocabulary:
    """Terms seen in at least ``min_doc_freq`` train reports, most frequent first.

    Truncation to ``max_size`` keeps the highest document frequencies; ties are
    broken lexicographically so the result is reproducible.
    """
    if min_doc_freq < 1:
        raise ValueError("min_doc_freq must be >= 1")
    df = document_frequencies(r.tokens for r in train_reports)
    ranked = sorted((t for t, c in df.items() if c >= min_doc_freq), key=lambda t: (-df[t], t))
    if max_size is not None:
        ranked = ranked[:max_size]
    if not ranked:
        raise DataError("vocabulary is empty; lower min_doc_freq or check cleaning")
    return Vocabulary(tuple(ranked), min_doc_freq, max_size, built_from)


def vectorize(report: ReportRecord | Sequence[str], vocab: Vocabulary, binary: bool = False,
              length_normalize: bool = False) -> SparseCountVector:
    tokens = report.tokens if isinstance(report, ReportRecord) else report
    counts: dict[int, float] = {}
    for tok in tokens:
        j = vocab.index.get(tok)
        if j is not None:
            counts[j] = counts.get(j, 0) + 1
    if binary:
        counts = {j: 1 for j in counts}
    if length_normalize and tokens:
        counts = {j: c / len(tokens) for j, c in counts.items()}
    return SparseCountVector(len(vocab), dict(sorted(counts.items())))


def count_matrix(reports: Sequence[ReportRecord], vocab: Vocabulary, binary: bool = False,
                 length_normalize: bool = False) -> sp.csr_matrix:
    """Stack ``vectorize`` over reports into a CSR matrix (rows follow ``reports``)."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for r in reports:
        v = vectorize(r, vocab, binary, length_normalize)
        indices.extend(v.entries.keys())
        data.extend(v.entries.values())
        indptr.append(len(indices))
    return sp.csr_matrix((np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64),
                          np.asarray(indptr, dtype=np.int64)), shape=(len(reports), len(vocab)))


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]

    def matrix(self, report_ids: Sequence[str]) -> np.ndarray:
        missing = [r for r in report_ids if r not in self.vectors]
        if missing:
            raise DataError(f"embeddings missing for report ids: {missing[:10]}")
        if not report_ids:
            return np.zeros((0, self.dim))
        return np.vstack([self.vectors[r] for r in report_ids])


def load_embeddings(path, expected_ids: Iterable[str] | None = None) -> EmbeddingTable:
    """Read ``report_id,v0,...,v{dim-1}`` rows; a leading header row is tolerated."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: embeddings file not found")
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            try:
                values = np.array([float(v) for v in row[1:]], dtype=np.float64)
            except ValueError:
                if lineno == 1:
                    continue
                raise DataError(f"{path}:{lineno}: non-numeric embedding value")
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise DataError(f"{path}:{lineno}: row has no embedding values")
            elif len(values) != dim:
                raise DataError(f"{path}:{lineno}: dimension {len(values)} != {dim}")
            if not np.all(np.isfinite(values)):
                raise DataError(f"{path}:{lineno}: non-finite embedding value")
            vectors[row[0]] = values
    if dim is None:
        raise DataError(f"{path}: no embedding rows")
    if expected_ids is not None:
        missing = sorted(set(expected_ids) - vectors.keys())
        if missing:
            raise DataError(f"{path}: missing embeddings for {len(missing)} report ids: "
                            + ", ".join(missing[:20]))
    return EmbeddingTable(dim, vectors)


def write_embeddings(path, table: EmbeddingTable, ids: Sequence[str] | None = None) -> None:
    ids = list(ids) if ids is not None else list(table.vectors)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["report_id"] + [f"e{i}" for i in range(table.dim)])
        for rid in ids:
            w.writerow([rid] + [repr(float(v)) for v in table.vectors[rid]])
