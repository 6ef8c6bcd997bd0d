#!/usr/bin/env python3
"""Replicate the threshold comparison over several seeds.

For each seed, runs the full desk-scale compare and reports how the
quantile-thresholded regime's final-generation grades relate to the
accept-everything baseline (median and interquartile range), plus the epoch
at which each regime reached its best validation loss.
"""

import argparse
from pathlib import Path

from auggen.experiment import ExperimentConfig, compare
from auggen.grading import nearest_rank


def iqr(values) -> float:
    return nearest_rank(values, 0.75) - nearest_rank(values, 0.25)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[17, 18, 19])
    parser.add_argument("--out-dir", default="runs/seed-sweep")
    args = parser.parse_args()

    median_wins = iqr_wins = 0
    for seed in args.seeds:
        summaries = {s.regime: s for s in compare(ExperimentConfig(seed=seed), Path(args.out_dir) / str(seed))}
        auggen = summaries["auggen"]
        baseline = summaries["baseline_all"]
        med_a, med_b = nearest_rank(auggen.final_grades, 0.5), nearest_rank(baseline.final_grades, 0.5)
        iqr_a, iqr_b = iqr(auggen.final_grades), iqr(baseline.final_grades)
        median_wins += med_a <= med_b
        iqr_wins += iqr_a <= iqr_b
        best = {name: s.best_epoch for name, s in summaries.items()}
        print(
            f"seed {seed}: median {med_a:.3f} vs {med_b:.3f} | "
            f"IQR {iqr_a:.3f} vs {iqr_b:.3f} | epochs-to-best {best}"
        )
    n = len(args.seeds)
    print(f"auggen at or below baseline_all: median {median_wins}/{n}, IQR {iqr_wins}/{n}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
