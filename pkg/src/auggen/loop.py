"""Self-augmenting training loop.

Each epoch runs a generation step then a training step. The generation
step samples ``n_generate`` candidates, grades them against the frozen
reference, and appends to the training dataset every candidate whose grade
passes the threshold and whose canonical key has never been seen (the seen
set starts with every true chorale, train and validation, and absorbs every
candidate ever produced, accepted or not). The training step draws the
epoch's batch plan uniformly with replacement from the augmented dataset
and rebuilds the model from that multiset. Validation loss on the fixed
held-out split drives best-snapshot selection and optional patience-based
early stopping.

Everything is a pure function of (config, split, feature set, model
hyperparameters): rerunning with the same inputs reproduces every file
byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .chorale import Chorale, canonical_key, serialize_chorale
from .corpus import Split
from .grading import ReferenceModel, Threshold, fit_reference, grade
from .model import BatchPlan, GenerativeModel
from .rng import stream

ORIGIN_TRUE = "true"
ORIGIN_GENERATED = "generated"


@dataclass(frozen=True)
class LoopConfig:
    n_generate: int  # candidates per epoch
    threshold: Threshold
    plan: BatchPlan
    max_epochs: int
    patience: int | None  # None: never stop early
    min_improvement: float
    seed: int

    def __post_init__(self) -> None:
        if self.n_generate < 0:
            raise ValueError(f"n_generate must be >= 0, got {self.n_generate}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience is not None and self.patience < 1:
            raise ValueError(f"patience must be >= 1 or None, got {self.patience}")
        if self.min_improvement < 0:
            raise ValueError(f"min_improvement must be >= 0, got {self.min_improvement}")

    def to_json(self) -> dict:
        return {
            "n_generate": self.n_generate,
            "threshold": self.threshold.to_json(),
            "batches": self.plan.batches,
            "batch_size": self.plan.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "min_improvement": self.min_improvement,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class DatasetEntry:
    chorale: Chorale
    origin: str  # ORIGIN_TRUE or ORIGIN_GENERATED
    acceptance_epoch: int | None  # None for true chorales


@dataclass(frozen=True)
class CandidateRecord:
    candidate_id: str
    grade: float
    accepted: bool
    reason: str  # "", "grade", or "duplicate"


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    candidates: tuple[CandidateRecord, ...]
    additions: int
    dataset_size: int
    train_loss: float
    val_loss: float
    multiset_ids: tuple[str, ...]  # ids drawn into this epoch's training multiset


@dataclass
class TrainState:
    """Mutable loop state; the validation set is never touched."""

    dataset: list[DatasetEntry]
    seen_keys: set[str]
    epoch: int = 0
    best_val_loss: float = math.inf
    best_epoch: int = -1
    best_snapshot: object = None
    epochs_since_improvement: int = 0


@dataclass(frozen=True)
class RunResult:
    config: LoopConfig
    epoch_logs: tuple[EpochLog, ...]
    best_epoch: int
    best_val_loss: float
    model: GenerativeModel  # restored to the best epoch's snapshot
    manifest: tuple[DatasetEntry, ...]
    reference: ReferenceModel
    reference_digest_before: str
    reference_digest_after: str

    @property
    def stopped_epoch(self) -> int:
        return self.epoch_logs[-1].epoch if self.epoch_logs else -1


def generation_step(
    state: TrainState,
    model: GenerativeModel,
    reference: ReferenceModel,
    config: LoopConfig,
    length_pool: Sequence[int],
) -> tuple[CandidateRecord, ...]:
    """Generate, grade, and filter ``n_generate`` candidates for the current epoch."""
    records = []
    for j in range(config.n_generate):
        rng = stream(config.seed, "gen", state.epoch, j)
        length = length_pool[int(rng.integers(0, len(length_pool)))]
        candidate = model.sample(length, rng, chorale_id=f"gen-e{state.epoch:03d}-c{j:03d}")
        report = grade(candidate, reference)
        key = canonical_key(candidate)
        duplicate = key in state.seen_keys
        state.seen_keys.add(key)
        passes = report.total <= config.threshold.value
        accepted = passes and not duplicate
        if accepted:
            state.dataset.append(
                DatasetEntry(chorale=candidate, origin=ORIGIN_GENERATED, acceptance_epoch=state.epoch)
            )
        reason = "" if accepted else ("duplicate" if duplicate else "grade")
        records.append(CandidateRecord(candidate.id, report.total, accepted, reason))
    return tuple(records)


def training_step(
    state: TrainState, model: GenerativeModel, config: LoopConfig
) -> tuple[float, tuple[str, ...]]:
    """One epoch of training on the augmented dataset; returns (train loss, multiset ids)."""
    chorales = [entry.chorale for entry in state.dataset]
    rng = stream(config.seed, "train", state.epoch)
    multiset = model.train_epoch(chorales, config.plan, rng)
    return model.mean_nll(multiset), tuple(c.id for c in multiset)


def run(
    config: LoopConfig,
    split: Split,
    feature_set: Sequence[str],
    model: GenerativeModel,
    *,
    weights=None,
    p_empty: float | None = None,
    reference: ReferenceModel | None = None,
) -> RunResult:
    """Run the full loop; see the module docstring for the epoch structure."""
    if reference is None:
        kwargs = {} if p_empty is None else {"p_empty": p_empty}
        reference = fit_reference(split.train, feature_set, weights=weights, **kwargs)
    digest_before = reference.digest()

    state = TrainState(
        dataset=[DatasetEntry(c, ORIGIN_TRUE, None) for c in split.train],
        seen_keys={canonical_key(c) for c in split.train} | {canonical_key(c) for c in split.validation},
    )
    length_pool = [c.length for c in split.train]
    validation = list(split.validation)

    logs: list[EpochLog] = []
    for epoch in range(config.max_epochs):
        state.epoch = epoch
        before = len(state.dataset)
        candidates = generation_step(state, model, reference, config, length_pool)
        additions = len(state.dataset) - before
        train_loss, multiset_ids = training_step(state, model, config)
        val_loss = model.mean_nll(validation)
        logs.append(
            EpochLog(
                epoch=epoch,
                candidates=candidates,
                additions=additions,
                dataset_size=len(state.dataset),
                train_loss=train_loss,
                val_loss=val_loss,
                multiset_ids=multiset_ids,
            )
        )
        if val_loss < state.best_val_loss - config.min_improvement:
            state.best_val_loss = val_loss
            state.best_epoch = epoch
            state.best_snapshot = model.snapshot()
            state.epochs_since_improvement = 0
        else:
            state.epochs_since_improvement += 1
            if config.patience is not None and state.epochs_since_improvement >= config.patience:
                break

    if state.best_snapshot is None:  # every epoch failed to improve on +inf: impossible, but stay safe
        state.best_epoch = logs[-1].epoch
        state.best_val_loss = logs[-1].val_loss
        state.best_snapshot = model.snapshot()
    model.restore(state.best_snapshot)

    return RunResult(
        config=config,
        epoch_logs=tuple(logs),
        best_epoch=state.best_epoch,
        best_val_loss=state.best_val_loss,
        model=model,
        manifest=tuple(state.dataset),
        reference=reference,
        reference_digest_before=digest_before,
        reference_digest_after=reference.digest(),
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_run(result: RunResult, out_dir: str | Path, extra_config: dict | None = None) -> Path:
    """Write the run artifacts into ``out_dir`` and return that path.

    Files: config.json, epoch_logs.csv, metrics.csv, dataset_manifest.jsonl,
    generated.jsonl (accepted chorales in corpus record format),
    best_model.json, reference.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    config_payload = dict(extra_config or {})
    config_payload["loop"] = result.config.to_json()
    (out / "config.json").write_text(json.dumps(config_payload, sort_keys=True) + "\n", encoding="utf-8")

    with open(out / "epoch_logs.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "candidate_id", "grade", "accepted", "reason"])
        for entry in result.epoch_logs:
            for rec in entry.candidates:
                writer.writerow([entry.epoch, rec.candidate_id, repr(rec.grade), int(rec.accepted), rec.reason])

    with open(out / "metrics.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "additions", "dataset_size", "train_loss", "val_loss"])
        for entry in result.epoch_logs:
            writer.writerow(
                [entry.epoch, entry.additions, entry.dataset_size, repr(entry.train_loss), repr(entry.val_loss)]
            )

    with open(out / "dataset_manifest.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for entry in result.manifest:
            fh.write(
                json.dumps(
                    {
                        "id": entry.chorale.id,
                        "origin": entry.origin,
                        "acceptance_epoch": entry.acceptance_epoch,
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")

    with open(out / "generated.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for entry in result.manifest:
            if entry.origin == ORIGIN_GENERATED:
                fh.write(serialize_chorale(entry.chorale))
                fh.write("\n")

    result.model.save(out / "best_model.json")
    result.reference.save(out / "reference.json")
    return out
