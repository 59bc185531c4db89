import sys
from datetime import date

import numpy as np
import pytest
import scipy.sparse as sp

from radrisk.corpus import PatientRecord, ReportRecord
from radrisk.synth import SynthConfig, generate_cohort


def patient(pid, ipv, entry=None, age=40, gender="female", races=("other",), marital="other"):
    if ipv and entry is None:
        entry = date(2015, 1, 1)
    return PatientRecord(pid, ipv, age, gender, frozenset(races), marital, entry if ipv else None)


def report(rid, pid, text="findings: left wrist normal alignment", day=date(2014, 1, 1),
           injury=None):
    return ReportRecord(rid, pid, day, text, injury_label=injury)


def random_sparse_counts(rng, n, d, density=0.2, max_count=4):
    X = sp.random(n, d, density=density, random_state=np.random.RandomState(rng.integers(2**31)),
                  data_rvs=lambda k: rng.integers(1, max_count + 1, size=k)).tocsr()
    return X.astype(float)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_cohort():
    return generate_cohort(SynthConfig(n_patients=120, signal_ratio=8.0, embedding_dim=6, seed=7))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
