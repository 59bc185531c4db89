import csv
import json

import pytest

from radrisk.cli import main, read_config


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def cohort_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cohort")
    assert main(["synth", "--out", str(out), "--n-patients", "150", "--signal-ratio", "10",
                 "--embedding-dim", "4", "--seed", "2"]) == 0
    return out


def data_args(d, embeddings=False):
    args = ["--reports", str(d / "reports.csv"), "--patients", str(d / "patients.csv")]
    if embeddings:
        args += ["--embeddings", str(d / "embeddings.csv")]
    return args


@pytest.fixture(scope="module")
def trained(cohort_dir, tmp_path_factory):
    run = tmp_path_factory.mktemp("run")
    assert main(["train", *data_args(cohort_dir, True), "--family", "lr,nn-embed", "--trials", "2",
                 "--seed", "5", "--out", str(run)]) == 0
    return run


def test_train_layout(trained):
    for i in (0, 1):
        for name in ("lr.json", "nn-embed.json", "vocabulary.json"):
            assert (trained / "models" / f"trial{i}" / name).is_file()
    grid = rows(trained / "metrics" / "grid_lr.csv")
    assert grid[0] == ["trial", "grid_point", "val_auc", "chosen"]
    assert len(grid) == 1 + 2 * 12
    assert sum(int(r[3]) for r in grid[1:]) == 2
    manifest = json.loads((trained / "run_manifest.json").read_text())
    entry = manifest["commands"]["train"]
    assert set(entry["inputs"]) == {"reports", "patients", "embeddings"}
    assert entry["seeds"]["master"] == 5 and len(entry["seeds"]["models"]) == 2


def test_evaluate_summary_row(cohort_dir, trained, capsys):
    assert main(["evaluate", *data_args(cohort_dir, True), "--out", str(trained)]) == 0
    summary = rows(trained / "metrics" / "auc_summary.csv")
    assert [r[0] for r in summary[1:]] == ["lr", "nn-embed"]
    assert " ± " in summary[1][4]
    assert len(rows(trained / "metrics" / "auc.csv")) == 1 + 4
    assert "lr" in capsys.readouterr().out


def test_audit_has_dash_for_male_row(cohort_dir, trained):
    assert main(["audit", *data_args(cohort_dir), "--out", str(trained)]) == 0
    table = {(r[0], r[1]): r for r in rows(trained / "metrics" / "audit_lr.csv")}
    assert table[("gender", "male")][3:] == ["---", "---", "---"]
    assert len(rows(trained / "metrics" / "audit_lr_thresholds.csv")) == 3


def test_dategap_outputs(cohort_dir, trained):
    assert main(["dategap", *data_args(cohort_dir), "--out", str(trained)]) == 0
    scatter = rows(trained / "plots" / "dategap_scatter.csv")
    assert scatter[0] == ["trial", "patient_id", "earliest_possible_gap_years",
                          "earliest_predicted_gap_years"]
    points = rows(trained / "plots" / "report_scores.csv")
    assert points[0] == ["trial", "report_id", "gap_years", "score"]
    summary = rows(trained / "metrics" / "dategap_lr.csv")
    assert summary[-1][0] == "pooled"
    assert all(float(r[5]) >= 0.95 for r in summary[1:-1])


def test_importance_finds_signal_words(cohort_dir, trained):
    assert main(["importance", *data_args(cohort_dir), "--out", str(trained), "--top", "10"]) == 0
    words = [r[1] for r in rows(trained / "metrics" / "importance.csv")[1:]]
    truth = json.loads((cohort_dir / "ground_truth.json").read_text())["signal_words"]
    assert len(set(words) & set(truth)) >= 8


def test_model_inspect(trained, capsys):
    assert main(["model", "inspect", str(trained / "models" / "trial0" / "lr.json")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["family"] == "lr" and len(info["sha256"]) == 64


def test_jobs_do_not_change_outputs(cohort_dir, tmp_path):
    outs = []
    for jobs in ("1", "2"):
        out = tmp_path / f"j{jobs}"
        assert main(["train", *data_args(cohort_dir), "--family", "lr", "--trials", "2",
                     "--grid", '[{"C": 1.0, "penalty": "l2"}, {"C": 0.1, "penalty": "l1"}]',
                     "--jobs", jobs, "--out", str(out)]) == 0
        outs.append(out)
    for rel in ("models/trial0/lr.json", "models/trial1/lr.json", "metrics/grid_lr.csv"):
        assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes()


class TestExitCodes:
    def test_usage_errors(self, cohort_dir, tmp_path, capsys):
        assert main([]) == 1
        assert main(["train", "--bogus"]) == 1
        assert main(["train", "--family", "svm", *data_args(cohort_dir), "--out", str(tmp_path)]) == 1
        assert main(["train", "--reports", str(tmp_path / "missing.csv"),
                     "--patients", str(cohort_dir / "patients.csv"), "--out", str(tmp_path)]) == 1
        assert main(["train", *data_args(cohort_dir), "--family", "nn-embed",
                     "--out", str(tmp_path)]) == 1
        assert main(["evaluate", *data_args(cohort_dir), "--out", str(tmp_path / "empty")]) == 1
        assert "missing.csv" in capsys.readouterr().err

    def test_data_errors(self, cohort_dir, tmp_path, trained, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("report_id,patient_id,report_date,text\nr1,P00000,2015-13-01,x\n")
        assert main(["train", "--reports", str(bad), "--patients", str(cohort_dir / "patients.csv"),
                     "--out", str(tmp_path)]) == 2
        assert "bad.csv:2" in capsys.readouterr().err
        # evaluating with a different corpus than the one trained on
        assert main(["evaluate", "--reports", str(bad), "--patients",
                     str(cohort_dir / "patients.csv"), "--out", str(trained)]) == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# cohort\nn-patients = 40\nseed = 3\nsignal_ratio=2.5\n")
    assert read_config(cfg) == {"n_patients": "40", "seed": "3", "signal_ratio": "2.5"}
    assert main(["synth", "--config", str(cfg), "--seed", "8", "--out", str(tmp_path / "c")]) == 0
    manifest = json.loads((tmp_path / "c" / "run_manifest.json").read_text())
    conf = manifest["commands"]["synth"]["config"]
    assert conf["seed"] == 8 and conf["n_patients"] == 40 and conf["signal_ratio"] == 2.5
    gt = json.loads((tmp_path / "c" / "ground_truth.json").read_text())
    assert gt["n_patients"] == 40
    cfg.write_text("colour = blue\n")
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "d")]) == 1
