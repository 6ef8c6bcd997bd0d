"""Experiment harness: threshold regimes, comparison runs, CSV reports.

A compare run trains one model per regime with identical data, seeds, and
hyperparameters; the regimes differ only in the acceptance threshold:

* ``auggen``         -- threshold at the ``quantile`` nearest-rank grade of
                        the training split (default Q3),
* ``baseline_none``  -- threshold -inf, no generated chorale ever accepted,
* ``baseline_all``   -- threshold +inf, every unique generation accepted.

Outputs are CSV only; plotting is left to external tools. figure1.csv has
the per-epoch grade quintuples of each regime's generation step;
figure2.csv has the corpus grade list plus the grades of ``n_eval`` fresh
generations from each regime's best snapshot.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Corpus, Split, load_corpus, save_split_manifest, split, teacher_corpus
from .features import DEFAULT_FEATURES, check_feature_set
from .grading import ReferenceModel, Threshold, fit_reference, grade, grade_quantile, nearest_rank
from .loop import ORIGIN_TRUE, LoopConfig, RunResult, run, save_run
from .model import BatchPlan, MarkovModel
from .rng import stream

log = logging.getLogger(__name__)

REGIME_AUGGEN = "auggen"
REGIME_NONE = "baseline_none"
REGIME_ALL = "baseline_all"
ALL_REGIMES = (REGIME_AUGGEN, REGIME_NONE, REGIME_ALL)

OUT_DIR_ENV = "AUGGEN_OUT_DIR"


class RegimeError(RuntimeError):
    """A regime run failed; partial results were flushed."""

    def __init__(self, regime: str, cause: BaseException):
        super().__init__(f"regime {regime!r} failed: {cause}")
        self.regime = regime


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a compare run needs; one seed drives all randomness."""

    corpus_path: str | None = None
    teacher_n: int = 80
    teacher_min_length: int = 32
    teacher_max_length: int = 48
    split_fraction: float = 0.8
    features: tuple[str, ...] = DEFAULT_FEATURES
    weights: dict[str, float] | None = None
    p_empty: float = 100.0
    regimes: tuple[str, ...] = ALL_REGIMES
    quantile: float = 0.75
    n_generate: int = 20
    batches: int = 64
    batch_size: int = 4
    max_epochs: int = 30
    patience: int | None = 5
    min_improvement: float = 1e-4
    markov_order: int = 2
    smoothing: float = 0.1
    n_eval: int = 100
    seed: int = 17

    def __post_init__(self) -> None:
        check_feature_set(self.features)
        if not self.regimes:
            raise ValueError("at least one regime is required")
        unknown = [r for r in self.regimes if r not in ALL_REGIMES]
        if unknown:
            raise ValueError(f"unknown regime(s) {unknown}; choose from {ALL_REGIMES}")
        if not 0.0 < self.quantile <= 1.0:
            raise ValueError(f"quantile must be in (0, 1], got {self.quantile}")
        if self.n_eval < 1:
            raise ValueError(f"n_eval must be >= 1, got {self.n_eval}")

    def to_json(self) -> dict:
        payload = {
            "corpus_path": self.corpus_path,
            "teacher_n": self.teacher_n,
            "teacher_min_length": self.teacher_min_length,
            "teacher_max_length": self.teacher_max_length,
            "split_fraction": self.split_fraction,
            "features": list(self.features),
            "weights": self.weights,
            "p_empty": self.p_empty,
            "regimes": list(self.regimes),
            "quantile": self.quantile,
            "n_generate": self.n_generate,
            "batches": self.batches,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "min_improvement": self.min_improvement,
            "markov_order": self.markov_order,
            "smoothing": self.smoothing,
            "n_eval": self.n_eval,
            "seed": self.seed,
        }
        return payload

    @classmethod
    def from_json(cls, payload: dict) -> "ExperimentConfig":
        kwargs = dict(payload)
        for key in ("features", "regimes"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


# The paper profile carries full-scale experiment settings; they are
# defaults for real corpora, not benchmark targets. The desk profile
# finishes a full three-regime comparison in seconds.
PROFILES: dict[str, ExperimentConfig] = {
    "desk": ExperimentConfig(),
    "paper": ExperimentConfig(
        teacher_n=351,
        n_generate=50,
        batches=2048,
        batch_size=8,
        max_epochs=40,
        patience=None,
        min_improvement=0.0,
        n_eval=351,
    ),
}


@dataclass(frozen=True)
class RegimeSummary:
    regime: str
    threshold: Threshold
    best_epoch: int
    best_val_loss: float
    epochs_ran: int
    epoch_grade_stats: tuple[tuple[int, float, float, float, float, float], ...]
    final_grades: tuple[float, ...]
    true_count: int
    generated_count: int

    @property
    def generated_fraction(self) -> float:
        return self.generated_count / (self.true_count + self.generated_count)

    def to_json(self) -> dict:
        return {
            "regime": self.regime,
            "threshold": self.threshold.to_json(),
            "best_epoch": self.best_epoch,
            "best_val_loss": self.best_val_loss,
            "epochs_ran": self.epochs_ran,
            "epoch_grade_stats": [list(row) for row in self.epoch_grade_stats],
            "final_grades": list(self.final_grades),
            "true_count": self.true_count,
            "generated_count": self.generated_count,
            "generated_fraction": self.generated_fraction,
        }


def load_or_synthesize_corpus(config: ExperimentConfig) -> Corpus:
    if config.corpus_path is not None:
        return load_corpus(config.corpus_path)
    return teacher_corpus(
        config.seed,
        config.teacher_n,
        (config.teacher_min_length, config.teacher_max_length),
    )


def regime_threshold(regime: str, train_grades: Sequence[float], quantile: float, corpus_digest: str) -> Threshold:
    if regime == REGIME_NONE:
        return Threshold(value=-math.inf, label=REGIME_NONE)
    if regime == REGIME_ALL:
        return Threshold(value=math.inf, label=REGIME_ALL)
    return grade_quantile(train_grades, quantile, corpus_digest=corpus_digest, label=REGIME_AUGGEN)


def grade_quintuple(grades: Sequence[float]) -> tuple[float, float, float, float, float]:
    return (
        min(grades),
        nearest_rank(grades, 0.25),
        nearest_rank(grades, 0.5),
        nearest_rank(grades, 0.75),
        max(grades),
    )


def run_regime(
    config: ExperimentConfig,
    regime: str,
    data_split: Split,
    reference: ReferenceModel,
    threshold: Threshold,
    out_dir: Path | None = None,
) -> tuple[RunResult, RegimeSummary]:
    loop_config = LoopConfig(
        n_generate=config.n_generate,
        threshold=threshold,
        plan=BatchPlan(batches=config.batches, batch_size=config.batch_size),
        max_epochs=config.max_epochs,
        patience=config.patience,
        min_improvement=config.min_improvement,
        seed=config.seed,
    )
    model = MarkovModel.with_vocab_from(data_split.train, order=config.markov_order, alpha=config.smoothing)
    result = run(loop_config, data_split, config.features, model, weights=config.weights, reference=reference)

    length_pool = [c.length for c in data_split.train]
    final_grades = []
    for i in range(config.n_eval):
        rng = stream(config.seed, "eval", regime, i)
        length = length_pool[int(rng.integers(0, len(length_pool)))]
        sample = result.model.sample(length, rng, chorale_id=f"eval-{regime}-{i:04d}")
        final_grades.append(grade(sample, reference).total)

    stats = tuple(
        (entry.epoch, *grade_quintuple([rec.grade for rec in entry.candidates]))
        for entry in result.epoch_logs
        if entry.candidates
    )
    true_count = sum(1 for e in result.manifest if e.origin == ORIGIN_TRUE)
    summary = RegimeSummary(
        regime=regime,
        threshold=threshold,
        best_epoch=result.best_epoch,
        best_val_loss=result.best_val_loss,
        epochs_ran=len(result.epoch_logs),
        epoch_grade_stats=stats,
        final_grades=tuple(final_grades),
        true_count=true_count,
        generated_count=len(result.manifest) - true_count,
    )
    if out_dir is not None:
        save_run(result, out_dir, extra_config={"regime": regime, "experiment": config.to_json()})
        (out_dir / "summary.json").write_text(json.dumps(summary.to_json(), sort_keys=True) + "\n", encoding="utf-8")
    return result, summary


def _write_figure1(path: Path, summaries: Sequence[RegimeSummary]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["regime", "epoch", "min", "q1", "median", "q3", "max"])
        for summary in summaries:
            for epoch, *quint in summary.epoch_grade_stats:
                writer.writerow([summary.regime, epoch, *[repr(x) for x in quint]])


def _write_figure2(path: Path, corpus_grades: Sequence[float], summaries: Sequence[RegimeSummary]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["source", "grade"])
        for g in corpus_grades:
            writer.writerow(["corpus", repr(g)])
        for summary in summaries:
            for g in summary.final_grades:
                writer.writerow([summary.regime, repr(g)])


def compare_detailed(config: ExperimentConfig, out_dir: str | Path) -> tuple[list[RegimeSummary], dict[str, RunResult]]:
    """Run every configured regime on identical inputs and emit the reports.

    On a regime failure, everything produced so far is still flushed and a
    :class:`RegimeError` naming the regime is raised.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_json(), sort_keys=True) + "\n", encoding="utf-8")

    corpus = load_or_synthesize_corpus(config)
    data_split = split(corpus, config.split_fraction, config.seed)
    save_split_manifest(data_split, out / "split.json")

    reference = fit_reference(data_split.train, config.features, weights=config.weights, p_empty=config.p_empty)
    reference.save(out / "reference.json")
    train_grades = [grade(c, reference).total for c in data_split.train]
    corpus_grades = [grade(c, reference).total for c in corpus]

    summaries: list[RegimeSummary] = []
    results: dict[str, RunResult] = {}
    failure: RegimeError | None = None
    for regime in config.regimes:
        threshold = regime_threshold(regime, train_grades, config.quantile, data_split.train.digest())
        try:
            result, summary = run_regime(config, regime, data_split, reference, threshold, out_dir=out / regime)
        except Exception as exc:  # flush partial results below, then surface
            log.error("regime %s failed: %s", regime, exc)
            failure = RegimeError(regime, exc)
            break
        summaries.append(summary)
        results[regime] = result

    _write_figure1(out / "figure1.csv", summaries)
    _write_figure2(out / "figure2.csv", corpus_grades, summaries)
    (out / "summary.json").write_text(
        json.dumps([s.to_json() for s in summaries], sort_keys=True) + "\n", encoding="utf-8"
    )
    if failure is not None:
        raise failure
    return summaries, results


def compare(config: ExperimentConfig, out_dir: str | Path) -> list[RegimeSummary]:
    return compare_detailed(config, out_dir)[0]


def resolve_out_dir(cli_value: str | None, default: str) -> Path:
    """CLI flag wins; otherwise the environment override; otherwise the default."""
    if cli_value:
        return Path(cli_value)
    env = os.environ.get(OUT_DIR_ENV)
    return Path(env) if env else Path(default)


def recompute_epoch_stats(epoch_logs_csv: str | Path) -> dict[tuple[str, int], tuple[float, ...]]:
    """Independent per-epoch grade quintuples straight from an epoch_logs.csv.

    Keys are (regime, epoch); for a single-run log the regime key is "".
    Uses numpy's inverted-CDF quantile, which realizes the same nearest-rank
    definition through different code, so it doubles as a consistency oracle.
    """
    import numpy as np

    grades: dict[tuple[str, int], list[float]] = {}
    with open(epoch_logs_csv, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            key = (row.get("regime", ""), int(row["epoch"]))
            grades.setdefault(key, []).append(float(row["grade"]))
    out = {}
    for key, values in grades.items():
        arr = np.asarray(values)
        out[key] = (
            float(arr.min()),
            float(np.quantile(arr, 0.25, method="inverted_cdf")),
            float(np.quantile(arr, 0.5, method="inverted_cdf")),
            float(np.quantile(arr, 0.75, method="inverted_cdf")),
            float(arr.max()),
        )
    return out
