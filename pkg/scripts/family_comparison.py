"""Test AUC (mean ± std over trials) per model family on a synthetic cohort.

    python scripts/family_comparison.py --n-patients 1000 --signal-ratio 5 --trials 5
"""
import argparse
import time

from radrisk.evaluation.metrics import roc_auc, trial_summary
from radrisk.models.registry import FAMILIES
from radrisk.pipeline import make_splits, prepare_corpus, run_trial, trial_seed
from radrisk.synth import SynthConfig, generate_cohort


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-patients", type=int, default=1000)
    ap.add_argument("--signal-ratio", type=float, default=5.0)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--families", default=",".join(FAMILIES))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    families = args.families.split(",")
    emb_dim = 32 if "nn-embed" in families else 0
    cohort = generate_cohort(SynthConfig(n_patients=args.n_patients, signal_ratio=args.signal_ratio,
                                         embedding_dim=emb_dim, seed=args.seed))
    corpus = prepare_corpus(cohort.reports, cohort.patients, embeddings=cohort.embeddings)
    splits = make_splits(corpus, "ipv", args.trials, args.seed)
    print(f"{len(corpus.patients)} patients, {len(corpus.reports)} reports, {args.trials} trials")
    for fam in families:
        t0 = time.perf_counter()
        aucs = [roc_auc(run_trial(corpus, s, "ipv", fam, seed=trial_seed(args.seed, s.trial_index)).scored)
                for s in splits]
        print(f"{fam:9s} {trial_summary(aucs).formatted()}   ({time.perf_counter() - t0:.0f}s)")


if __name__ == "__main__":
    main()
