from collections import Counter
from datetime import date, timedelta

import numpy as np
import pytest

from radrisk.corpus import clean_text, load_patients, load_reports
from radrisk.features import load_embeddings
from radrisk.pipeline import (CorpusOptions, load_corpus, make_splits, prepare_corpus,
                              task_patients, task_reports, trial_features)
from radrisk.synth import (AGE_DIST, FOOTER_MARKERS, HEADER_MARKERS, MARITAL_DIST, RACE_DIST,
                           SynthConfig, generate_cohort)


@pytest.fixture(scope="module")
def big():
    return generate_cohort(SynthConfig(n_patients=2000, seed=11))


def test_deterministic_given_seed():
    cfg = SynthConfig(n_patients=50, embedding_dim=3, seed=5)
    a, b = generate_cohort(cfg), generate_cohort(cfg)
    assert a.reports == b.reports and a.patients == b.patients
    assert a.ground_truth == b.ground_truth
    assert generate_cohort(SynthConfig(n_patients=50, seed=6)).reports != a.reports


def test_timeline_invariants(big):
    cfg = SynthConfig()
    gt = big.ground_truth
    by_patient = {}
    for r in big.reports:
        by_patient.setdefault(r.patient_id, []).append(r)
    for p in big.patients:
        g = gt["patients"][p.patient_id]
        reps = by_patient[p.patient_id]
        assert all(cfg.window_start <= r.report_date <= cfg.window_end for r in reps)
        if not p.ipv_label:
            assert g["onset_date"] is None and p.program_entry_date is None
            assert all(r.injury_label is None for r in reps)
            assert not any(gt["reports"][r.report_id]["signal_bearing"] for r in reps)
            continue
        onset = date.fromisoformat(g["onset_date"])
        assert onset < p.program_entry_date <= cfg.window_end
        assert all(r.report_date >= onset - timedelta(days=366) for r in reps)
        bearing = [r for r in reps if gt["reports"][r.report_id]["signal_bearing"]]
        assert all(r.report_date >= onset for r in bearing)
        with_word = [r.report_date for r in bearing if gt["reports"][r.report_id]["has_signal_word"]]
        expect = min(with_word).isoformat() if with_word else None
        assert g["earliest_signal_date"] == expect


def test_injury_labels_need_signal_words(big):
    gt = big.ground_truth["reports"]
    victim_reports = [r for r in big.reports if r.injury_label is not None]
    assert all(gt[r.report_id]["has_signal_word"] for r in victim_reports if r.injury_label)
    eligible = [r for r in victim_reports if gt[r.report_id]["has_signal_word"]]
    rate = np.mean([r.injury_label for r in eligible])
    assert abs(rate - 0.3) < 4 * np.sqrt(0.3 * 0.7 / len(eligible))


def test_signal_words_boosted_by_ratio(big):
    cfg = SynthConfig()
    gt = big.ground_truth["reports"]
    signal = set(cfg.signal_words)
    counts = {True: [0, 0], False: [0, 0]}
    for r in big.reports:
        toks = clean_text(r.raw_text, HEADER_MARKERS, FOOTER_MARKERS)
        c = counts[gt[r.report_id]["signal_bearing"]]
        c[0] += sum(t in signal for t in toks)
        c[1] += len(toks)
    zipf = 1 / np.arange(1, cfg.background_vocab_size + 1)
    base = zipf[cfg.signal_base_rank - 1] * len(signal)
    p_plain = base / (zipf.sum() + base)
    p_boost = base * cfg.signal_ratio / (zipf.sum() + base * cfg.signal_ratio)
    for boosted, expect in ((False, p_plain), (True, p_boost)):
        hits, total = counts[boosted]
        assert hits / total == pytest.approx(expect, abs=4 * np.sqrt(expect / total))


def test_demographic_marginals(big):
    n = len(big.patients)
    for dist, values in ((AGE_DIST, [p.age_bin for p in big.patients]),
                         (RACE_DIST, [next(iter(p.races)) for p in big.patients]),
                         (MARITAL_DIST, [p.marital for p in big.patients])):
        total = sum(dist.values())
        counts = Counter(values)
        for k, w in dist.items():
            q = w / total
            assert abs(counts[k] / n - q) < 4 * np.sqrt(q * (1 - q) / n) + 1e-9
    assert {p.gender for p in big.patients} == {"female"}


@pytest.mark.parametrize("bad", [dict(ipv_fraction=0.0), dict(ipv_fraction=1.0),
                                 dict(signal_ratio=0.5), dict(injury_rate=1.5),
                                 dict(window_end=date(2009, 6, 1)),
                                 dict(signal_words=("Fracture",)), dict(signal_words=()),
                                 dict(signal_base_rank=10_000)])
def test_infeasible_configs_rejected(bad):
    with pytest.raises(ValueError):
        generate_cohort(SynthConfig(**bad))


def test_config_json_round_trip():
    cfg = SynthConfig(n_patients=10, signal_ratio=3.0, seed=2)
    assert SynthConfig.from_json(cfg.to_json()) == cfg


def test_written_files_reload_and_clean_to_generated_tokens(tmp_path, small_cohort):
    paths = small_cohort.write(tmp_path)
    reps, _ = load_reports(paths["reports"])
    pats, _ = load_patients(paths["patients"])
    assert reps == small_cohort.reports and pats == small_cohort.patients
    emb = load_embeddings(paths["embeddings"], [r.report_id for r in reps])
    assert emb.dim == 6
    corpus = load_corpus(paths["reports"], paths["patients"], CorpusOptions(), paths["embeddings"])
    assert all(len(r.tokens) >= 5 for r in corpus.reports)
    assert all(t.isalpha() for r in corpus.reports for t in r.tokens)


class TestPipeline:
    def test_vocabulary_uses_train_reports_only(self, small_cohort):
        corpus = prepare_corpus(small_cohort.reports, small_cohort.patients)
        split = make_splits(corpus, "ipv", 1, 0)[0]
        tf = trial_features(corpus, split, "ipv", "lr")
        train = [r for r in corpus.reports if split.assignment[r.patient_id] == "train"]
        df = Counter(t for r in train for t in set(r.tokens))
        assert all(df[t] >= 2 for t in tf.vocab.terms)
        assert tf.data.X_train.shape[0] == len(train)
        assert {r.patient_id for r in tf.test_reports} <= set(split.patients_in("test"))

    def test_injury_task_uses_victim_reports(self, small_cohort):
        corpus = prepare_corpus(small_cohort.reports, small_cohort.patients)
        assert all(p.ipv_label for p in task_patients(corpus, "injury"))
        pairs = task_reports(corpus, "injury")
        assert {lab for _, lab in pairs} == {True, False}
        with pytest.raises(ValueError):
            task_reports(corpus, "fracture")
