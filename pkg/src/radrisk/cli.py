"""Command-line entry point: ``radrisk {synth,train,evaluate,audit,dategap,importance,model}``.

Exit codes: 0 success, 1 usage error, 2 data error.

Output layout under ``--out``::

    models/splits.json                patient assignment per trial (shared by all families)
    models/trial{i}/{family}.json     chosen model per trial
    models/trial{i}/vocabulary.json   train-split vocabulary of that trial
    metrics/*.csv                     grid tables, AUC, audit, date gap, importance
    plots/*.csv                       date-gap scatter data
    run_manifest.json                 config, seeds and input digests per command
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import DataError, TrialSplit
from .evaluation.audit import AUDIT_HEADER, audit_records, render_table, subgroup_audit
from .evaluation.dategap import date_gap_analysis, pooled_median_gap
from .evaluation.importance import feature_importance
from .evaluation.metrics import (DASH, UndefinedMetricError, format_rate, roc_auc,
                                 threshold_at_sensitivity, trial_summary)
from .features import Vocabulary
from .models.grid import GridPointError, grid_search
from .models.registry import FAMILIES, dumps, load_artifact, model_from_json, save_model
from .pipeline import (TASKS, Corpus, CorpusOptions, features_for, load_corpus, make_splits,
                       score_reports, trial_features, trial_seed)
from .synth import SynthConfig, generate_cohort

log = logging.getLogger("radrisk")

DEFAULT_FAMILIES = ("lr", "rf", "gbt", "nn-bow")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- config files -------------------------------------------------------------

def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment. Keys use flag names (dashes or underscores)."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"--config: no such file: {path}")
    out = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _apply_config(sub: argparse.ArgumentParser, config: dict[str, str]) -> None:
    known = {a.dest: a for a in sub._actions}
    for key, value in config.items():
        action = known.get(key)
        if action is None or key in ("help", "config"):
            raise UsageError(f"config key {key!r} is not an option of '{sub.prog}'")
        if action.nargs == 0:  # store_true
            value = value.lower() in ("1", "true", "yes", "on")
        sub.set_defaults(**{key: value})


# -- parser -------------------------------------------------------------------

def _common(p, data=True, evaluation=False):
    p.add_argument("--config", help="key = value file; explicit flags take precedence")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    if data:
        p.add_argument("--reports", help="reports CSV or JSONL")
        p.add_argument("--patients", help="patients CSV or JSONL")
        p.add_argument("--embeddings", help="per-report embedding CSV (nn-embed family)")
        p.add_argument("--task", choices=TASKS)
        p.add_argument("--min-tokens", type=int)
        p.add_argument("--lenient", action="store_true",
                       help="skip malformed input rows instead of failing")
    if evaluation:
        p.add_argument("--family", help="model family (or comma-separated list where allowed)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="radrisk", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"radrisk {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    _common(p, data=False)
    p.add_argument("--n-patients", type=int, default=1000)
    p.add_argument("--ipv-fraction", type=float, default=0.25)
    p.add_argument("--signal-ratio", type=float, default=5.0)
    p.add_argument("--injury-rate", type=float, default=0.3)
    p.add_argument("--reports-per-patient", type=float, default=5.0)
    p.add_argument("--embedding-dim", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="grid search per trial and save chosen models")
    _common(p, evaluation=True)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--grid", help="JSON list of grid points replacing the family default")
    p.add_argument("--min-doc-freq", type=int, default=2)
    p.add_argument("--max-vocab", type=int, default=20_000)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("evaluate", help="test AUC per trial and mean ± std per family")
    _common(p, evaluation=True)

    p = sub.add_parser("audit", help="subgroup table at a sensitivity-constrained threshold")
    _common(p, evaluation=True)
    p.add_argument("--sensitivity", type=float, default=0.95)

    p = sub.add_parser("dategap", help="early-detection lead times at a specificity target")
    _common(p, evaluation=True)
    p.add_argument("--specificity", type=float, default=0.95)

    p = sub.add_parser("importance", help="top words by mean logistic coefficient")
    _common(p, evaluation=True)
    p.add_argument("--top", type=int, default=20)

    p = sub.add_parser("model", help="model artifact utilities")
    msub = p.add_subparsers(dest="model_command", parser_class=_Parser)
    ins = msub.add_parser("inspect", help="print an artifact summary")
    ins.add_argument("path")
    return parser


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    pre = _Parser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config and known.command in parser._subparsers._group_actions[0].choices:
        sub = parser._subparsers._group_actions[0].choices[known.command]
        _apply_config(sub, read_config(known.config))
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("radrisk: a subcommand is required (try --help)")
    return args


# -- helpers --------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise UsageError(f"{args.command}: --{name.replace('_', '-')} is required")


def _input_files(args) -> dict[str, str]:
    files = {}
    for name in ("reports", "patients", "embeddings"):
        value = getattr(args, name, None)
        if value:
            if not Path(value).is_file():
                raise UsageError(f"--{name}: no such file: {value}")
            files[name] = value
    return files


def _families(args, default=DEFAULT_FAMILIES, single=False) -> list[str]:
    fams = [f.strip() for f in (args.family or ",".join(default)).split(",") if f.strip()]
    bad = [f for f in fams if f not in FAMILIES]
    if bad:
        raise UsageError(f"unknown family {bad[0]!r}; choose from {', '.join(FAMILIES)}")
    if single and len(fams) != 1:
        raise UsageError(f"{args.command} takes a single --family")
    return fams


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _f(x) -> str:
    return "" if x is None else f"{x:.6f}"


def _update_manifest(out: Path, command: str, entry: dict) -> None:
    path = out / "run_manifest.json"
    manifest = {"package_version": __version__, "commands": {}}
    if path.exists():
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            log.warning("replacing unreadable %s", path)
    manifest.setdefault("commands", {})[command] = entry
    manifest["package_version"] = __version__
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _config_record(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose",)}


# -- synth ----------------------------------------------------------------------

def cmd_synth(args) -> None:
    _require(args, "out")
    cfg = SynthConfig(n_patients=args.n_patients, ipv_fraction=args.ipv_fraction,
                      signal_ratio=args.signal_ratio, injury_rate=args.injury_rate,
                      reports_per_patient_mean=args.reports_per_patient,
                      embedding_dim=args.embedding_dim, seed=args.seed)
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(f"synth: {exc}") from exc
    out = Path(args.out)
    cohort = generate_cohort(cfg)
    paths = cohort.write(out)
    _update_manifest(out, "synth", {
        "config": _config_record(args), "seeds": {"synth": cfg.seed},
        "outputs": {k: sha256_file(p) for k, p in sorted(paths.items())}})
    gt = cohort.ground_truth
    print(f"wrote {gt['n_patients']} patients ({gt['n_victims']} victims) and "
          f"{gt['n_reports']} reports to {out}")


# -- train ----------------------------------------------------------------------

def _corpus_options(args) -> CorpusOptions:
    return CorpusOptions(min_tokens=3 if args.min_tokens is None else int(args.min_tokens),
                         min_doc_freq=getattr(args, "min_doc_freq", 2),
                         max_vocab=getattr(args, "max_vocab", 20_000),
                         strict=not args.lenient)


@dataclass
class _Job:
    corpus: Corpus
    split: TrialSplit
    task: str
    family: str
    opts: CorpusOptions
    grid: list | None
    seed: int


def _train_job(job: _Job):
    tf = trial_features(job.corpus, job.split, job.task, job.family, job.opts)
    result = grid_search(job.family, tf.data, job.grid, job.seed)
    return job.split.trial_index, job.family, result, tf.vocab


def cmd_train(args) -> None:
    _require(args, "reports", "patients", "out")
    inputs = _input_files(args)
    fams = _families(args)
    task = args.task or "ipv"
    if task not in TASKS:
        raise UsageError(f"--task must be one of {', '.join(TASKS)}")
    if "nn-embed" in fams and not args.embeddings:
        raise UsageError("the nn-embed family needs --embeddings")
    if args.trials < 1 or args.jobs < 1:
        raise UsageError("--trials and --jobs must be positive")
    grid = None
    if args.grid:
        if len(fams) != 1:
            raise UsageError("--grid applies to a single --family")
        try:
            grid = json.loads(args.grid)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--grid: invalid JSON ({exc})") from exc
        if not isinstance(grid, list) or not grid or not all(isinstance(g, dict) for g in grid):
            raise UsageError("--grid must be a non-empty JSON list of objects")
    opts = _corpus_options(args)
    corpus = load_corpus(args.reports, args.patients, opts, args.embeddings)
    for note in corpus.load_notes:
        log.warning("skipped: %s", note)
    splits = make_splits(corpus, task, args.trials, args.seed)
    out = Path(args.out)
    models = out / "models"
    models.mkdir(parents=True, exist_ok=True)
    (models / "splits.json").write_text(dumps({
        "task": task, "master_seed": args.seed, "min_tokens": opts.min_tokens,
        "min_doc_freq": opts.min_doc_freq, "max_vocab": opts.max_vocab,
        "inputs": {k: sha256_file(v) for k, v in inputs.items()},
        "trials": [{"trial": s.trial_index, "seed": s.seed, "assignment": s.assignment}
                   for s in splits]}), encoding="utf-8")

    jobs = [_Job(corpus, s, task, fam, opts, grid, trial_seed(args.seed, s.trial_index))
            for fam in fams for s in splits]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_train_job, jobs))
    else:
        results = [_train_job(j) for j in jobs]

    digests = {}
    grid_rows = {f: [] for f in fams}
    for trial, fam, result, vocab in results:  # single writer, fixed order
        tdir = models / f"trial{trial}"
        vref = None
        if vocab is not None:
            vpath = tdir / "vocabulary.json"
            tdir.mkdir(parents=True, exist_ok=True)
            vocab.save(vpath)
            vref = {"file": "vocabulary.json", "size": len(vocab), "sha256": sha256_file(vpath)}
        digests[f"trial{trial}/{fam}.json"] = save_model(
            tdir / f"{fam}.json", result.model, result.best_params, vref,
            {"task": task, "trial": trial, "val_auc": result.val_auc})
        for params, auc in result.table:
            grid_rows[fam].append((trial, json.dumps(params, sort_keys=True), _f(auc),
                                   int(params == result.best_params)))
        print(f"{fam} trial {trial}: chose {json.dumps(result.best_params, sort_keys=True)} "
              f"(validation AUC {result.val_auc:.4f})")
    for fam, rows in grid_rows.items():
        _write_csv(out / "metrics" / f"grid_{fam}.csv",
                   ("trial", "grid_point", "val_auc", "chosen"), rows)
    _update_manifest(out, "train", {
        "config": _config_record(args),
        "seeds": {"master": args.seed, "splits": [s.seed for s in splits],
                  "models": [trial_seed(args.seed, s.trial_index) for s in splits]},
        "inputs": {k: sha256_file(v) for k, v in inputs.items()},
        "models": dict(sorted(digests.items()))})


# -- evaluation commands ----------------------------------------------------------

@dataclass
class _Trained:
    corpus: Corpus
    splits: list[TrialSplit]
    task: str
    opts: CorpusOptions
    info: dict
    inputs: dict


def _load_trained(args) -> _Trained:
    _require(args, "reports", "patients", "out")
    inputs = _input_files(args)
    spath = Path(args.out) / "models" / "splits.json"
    if not spath.is_file():
        raise UsageError(f"{spath} not found; run 'radrisk train --out {args.out}' first")
    info = json.loads(spath.read_text(encoding="utf-8"))
    for name in ("reports", "patients"):
        if info["inputs"].get(name) != sha256_file(inputs[name]):
            raise DataError(f"--{name} differs from the file used by 'train' in {args.out}")
    task = args.task or info["task"]
    if task != info["task"]:
        raise UsageError(f"models in {args.out} were trained for task {info['task']!r}")
    min_tokens = info["min_tokens"] if args.min_tokens is None else int(args.min_tokens)
    opts = CorpusOptions(min_tokens=min_tokens, min_doc_freq=info["min_doc_freq"],
                         max_vocab=info["max_vocab"], strict=not args.lenient)
    corpus = load_corpus(args.reports, args.patients, opts, args.embeddings)
    splits = [TrialSplit(t["trial"], t["seed"], t["assignment"]) for t in info["trials"]]
    return _Trained(corpus, splits, task, opts, info, inputs)


def _trained_families(args, tr: _Trained) -> list[str]:
    tdir = Path(args.out) / "models" / "trial0"
    present = [f for f in FAMILIES if (tdir / f"{f}.json").is_file()]
    if args.family:
        fams = _families(args)
        missing = [f for f in fams if f not in present]
        if missing:
            raise UsageError(f"no trained {missing[0]} models in {args.out}")
        return fams
    if not present:
        raise UsageError(f"no trained models in {args.out}")
    return present


def _scored_trials(args, tr: _Trained, family: str):
    """Per trial: (artifact, scored test reports)."""
    out = []
    for split in tr.splits:
        tdir = Path(args.out) / "models" / f"trial{split.trial_index}"
        mpath = tdir / f"{family}.json"
        if not mpath.is_file():
            raise DataError(f"{mpath} missing")
        art = load_artifact(mpath)
        model = model_from_json(art)
        vocab = None
        if family != "nn-embed":
            vref = art.get("vocabulary") or {}
            vpath = tdir / vref.get("file", "vocabulary.json")
            if vref.get("sha256") and sha256_file(vpath) != vref["sha256"]:
                raise DataError(f"{vpath} does not match the vocabulary {mpath} was trained on")
            vocab = Vocabulary.load(vpath)
        X, y, reps = features_for(tr.corpus, split, tr.task, family, vocab, tr.opts)
        out.append((art, score_reports(model, X, reps, y)))
    return out


def _finish(args, command: str, tr: _Trained, extra: dict | None = None) -> None:
    _update_manifest(Path(args.out), command, {
        "config": _config_record(args),
        "seeds": {"master": tr.info["master_seed"], "splits": [s.seed for s in tr.splits]},
        "inputs": {k: sha256_file(v) for k, v in tr.inputs.items()}, **(extra or {})})


def cmd_evaluate(args) -> None:
    tr = _load_trained(args)
    out = Path(args.out)
    per_trial, summary = [], []
    for fam in _trained_families(args, tr):
        aucs = []
        for split, (art, scored) in zip(tr.splits, _scored_trials(args, tr, fam)):
            auc = roc_auc(scored)
            aucs.append(auc)
            per_trial.append((fam, split.trial_index, _f(auc),
                              json.dumps(art["grid_point"], sort_keys=True)))
        try:
            s = trial_summary(aucs, "auc")
            summary.append((fam, len(aucs), _f(s.mean), _f(s.std), s.formatted()))
        except UndefinedMetricError:
            summary.append((fam, len(aucs), _f(aucs[0]), "", f"{aucs[0]:.3f} ± {DASH}"))
    _write_csv(out / "metrics" / "auc.csv", ("family", "trial", "auc", "grid_point"), per_trial)
    header = ("family", "n_trials", "auc_mean", "auc_std", "auc")
    _write_csv(out / "metrics" / "auc_summary.csv", header, summary)
    print(render_table(("family", "trials", "test AUC"), [(r[0], str(r[1]), r[4]) for r in summary]),
          end="")
    _finish(args, "evaluate", tr)


def cmd_audit(args) -> None:
    tr = _load_trained(args)
    fam = _families(args, ("lr",), single=True)[0]
    if not 0 < args.sensitivity <= 1:
        raise UsageError("--sensitivity must lie in (0, 1]")
    trials, thr_rows = [], []
    for split, (_, scored) in zip(tr.splits, _scored_trials(args, tr, fam)):
        thr = threshold_at_sensitivity(scored, target=args.sensitivity)
        trials.append((scored, thr))
        thr_rows.append((split.trial_index, _f(thr)))
    records = audit_records(subgroup_audit(trials, tr.corpus.patients))
    out = Path(args.out) / "metrics"
    _write_csv(out / f"audit_{fam}.csv", AUDIT_HEADER, records)
    _write_csv(out / f"audit_{fam}_thresholds.csv", ("trial", "threshold"), thr_rows)
    print(render_table(AUDIT_HEADER, records), end="")
    _finish(args, "audit", tr)


def cmd_dategap(args) -> None:
    tr = _load_trained(args)
    fam = _families(args, ("lr",), single=True)[0]
    if tr.task != "ipv":
        raise UsageError("dategap applies to the ipv task only")
    if not 0 < args.specificity <= 1:
        raise UsageError("--specificity must lie in (0, 1]")
    results, rows, scatter, points = [], [], [], []
    for split, (_, scored) in zip(tr.splits, _scored_trials(args, tr, fam)):
        r = date_gap_analysis(scored, tr.corpus.patients, args.specificity)
        results.append(r)
        i = split.trial_index
        rows.append((i, _f(r.threshold), len(r.victims), len(r.detected),
                     format_rate(r.patient_sensitivity), format_rate(r.patient_specificity),
                     _f(r.median_gap_years), _f(r.median_possible_gap_years)))
        scatter += [(i, v.patient_id, _f(v.earliest_possible_gap), _f(v.earliest_predicted_gap))
                    for v in r.victims]
        points += [(i, rid, _f(gap), _f(score)) for rid, gap, score in r.report_points]
    n_vic = sum(len(r.victims) for r in results)
    n_det = sum(len(r.detected) for r in results)
    possible = [v.earliest_possible_gap for r in results for v in r.victims]
    rows.append(("pooled", "", n_vic, n_det, format_rate(n_det / n_vic if n_vic else None),
                 format_rate(float(np.mean([r.patient_specificity for r in results]))),
                 _f(pooled_median_gap(results)),
                 _f(float(-np.median(possible)) if possible else None)))
    header = ("trial", "threshold", "n_victims", "n_detected", "patient_sensitivity",
              "patient_specificity", "median_gap_years", "median_possible_gap_years")
    out = Path(args.out)
    _write_csv(out / "metrics" / f"dategap_{fam}.csv", header, rows)
    _write_csv(out / "plots" / "dategap_scatter.csv",
               ("trial", "patient_id", "earliest_possible_gap_years",
                "earliest_predicted_gap_years"), scatter)
    _write_csv(out / "plots" / "report_scores.csv", ("trial", "report_id", "gap_years", "score"),
               points)
    print(render_table(header, [tuple(str(x) for x in r) for r in rows]), end="")
    _finish(args, "dategap", tr)


def cmd_importance(args) -> None:
    tr = _load_trained(args)
    fam = _families(args, ("lr",), single=True)[0]
    if fam != "lr":
        raise UsageError("importance ranks logistic-regression coefficients; use --family lr")
    pairs = []
    for split in tr.splits:
        tdir = Path(args.out) / "models" / f"trial{split.trial_index}"
        pairs.append((model_from_json(load_artifact(tdir / "lr.json")),
                      Vocabulary.load(tdir / "vocabulary.json")))
    if args.top < 1:
        raise UsageError("--top must be positive")
    ranked = feature_importance(pairs, args.top)
    rows = [(i + 1, word, _f(coef)) for i, (word, coef) in enumerate(ranked)]
    _write_csv(Path(args.out) / "metrics" / "importance.csv", ("rank", "word", "mean_coefficient"),
               rows)
    print(render_table(("rank", "word", "mean coef"), [tuple(map(str, r)) for r in rows]), end="")
    _finish(args, "importance", tr)


def cmd_model(args) -> None:
    if args.model_command != "inspect":
        raise UsageError("usage: radrisk model inspect PATH")
    path = Path(args.path)
    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    try:
        art = load_artifact(path)
    except (ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    summary = {k: art[k] for k in ("family", "grid_point", "hyperparameters", "n_parameters",
                                   "vocabulary", "extra")}
    summary["sha256"] = sha256_file(path)
    print(json.dumps(summary, indent=1, sort_keys=True))


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "evaluate": cmd_evaluate,
            "audit": cmd_audit, "dategap": cmd_dategap, "importance": cmd_importance,
            "model": cmd_model}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, GridPointError, UndefinedMetricError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
