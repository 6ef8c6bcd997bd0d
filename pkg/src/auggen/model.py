"""Generative-model contract and the order-k Markov reference model.

The training loop depends only on :class:`GenerativeModel`; any sequence
model that can sample a chorale, score held-out chorales, and rebuild
itself from a sampled multiset can be plugged in. The shipped
implementation is :class:`MarkovModel`, an additive-smoothed count model
over the token grid whose context for voice ``v`` at timestep ``t`` is the
``order`` previous tokens of voice ``v`` followed by the timestep-``t``
tokens of the voices above it (soprano first).
"""

from __future__ import annotations

import abc
import copy
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .chorale import HOLD, REST, Chorale, Token, token_to_str, validate

log = logging.getLogger(__name__)

START = "^"  # context padding before timestep 0; never emitted

Context = tuple[Token, ...]

_SNAPSHOT_FORMAT = "auggen-markov-v1"


@dataclass(frozen=True)
class BatchPlan:
    """Per-epoch training budget: ``batches`` uniform batches of ``batch_size``.

    Sampling is uniform with replacement from the current training dataset,
    so the amount of training per epoch is fixed regardless of how large
    the dataset has grown.
    """

    batches: int
    batch_size: int

    def __post_init__(self) -> None:
        if self.batches < 1:
            raise ValueError(f"batches must be >= 1, got {self.batches}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def draws_per_epoch(self) -> int:
        return self.batches * self.batch_size


class GenerativeModel(abc.ABC):
    """Behavior contract the training loop relies on."""

    @abc.abstractmethod
    def train_epoch(self, dataset: Sequence[Chorale], plan: BatchPlan, rng: np.random.Generator) -> list[Chorale]:
        """Run one epoch of training; returns the sampled epoch multiset."""

    @abc.abstractmethod
    def sample(self, length: int, rng: np.random.Generator, chorale_id: str = "sample") -> Chorale:
        """Draw one chorale of ``length`` timesteps; output always validates."""

    @abc.abstractmethod
    def mean_nll(self, chorales: Sequence[Chorale]) -> float:
        """Mean negative log-likelihood per (voice, timestep) position."""

    @abc.abstractmethod
    def snapshot(self) -> object:
        """Opaque immutable state for :meth:`restore`."""

    @abc.abstractmethod
    def restore(self, state: object) -> None:
        """Reset the model to a previously captured snapshot."""

    @abc.abstractmethod
    def save(self, path) -> None:
        """Serialize the model to a single versioned file."""


def _token_sort_key(tok: Token) -> tuple[int, int | str]:
    if isinstance(tok, int):
        return (0, tok)
    return (1, tok)


def iter_token_events(chorale: Chorale, order: int) -> Iterator[tuple[int, Context, Token]]:
    """Yield (voice, context, token) for every grid position of ``chorale``."""
    voices = chorale.voices
    padded = [(START,) * order + voice for voice in voices]
    for t in range(chorale.length):
        cross: Context = ()
        for v in range(len(voices)):
            context = padded[v][t : t + order] + cross
            yield v, context, voices[v][t]
            cross = cross + (voices[v][t],)


class MarkovModel(GenerativeModel):
    """Order-k count model with additive smoothing over the chorale grid.

    The per-voice vocabulary is fixed at construction; counts can be
    rebuilt at will with :meth:`fit` (the training loop rebuilds them every
    epoch from the epoch's sampled multiset). A freshly constructed model
    has zero counts everywhere, i.e. it is the uniform model over each
    voice's vocabulary.
    """

    def __init__(self, order: int, alpha: float, vocabs: Sequence[Sequence[Token]]):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if not alpha > 0:
            raise ValueError(f"smoothing alpha must be > 0, got {alpha}")
        if len(vocabs) != 4:
            raise ValueError(f"expected 4 per-voice vocabularies, got {len(vocabs)}")
        cleaned = []
        for v, vocab in enumerate(vocabs):
            tokens = sorted({tok for tok in vocab if tok != START}, key=_token_sort_key)
            if not tokens:
                raise ValueError(f"voice {v} vocabulary is empty")
            cleaned.append(tuple(tokens))
        self.order = order
        self.alpha = float(alpha)
        self.vocabs: tuple[tuple[Token, ...], ...] = tuple(cleaned)
        self._index = [{tok: i for i, tok in enumerate(vocab)} for vocab in self.vocabs]
        self._counts: list[dict[Context, dict[Token, int]]] = [{} for _ in range(4)]
        self._totals: list[dict[Context, int]] = [{} for _ in range(4)]

    @classmethod
    def with_vocab_from(cls, chorales: Iterable[Chorale], order: int, alpha: float) -> "MarkovModel":
        """Build an untrained model whose vocabularies cover ``chorales``."""
        seen: list[set[Token]] = [set() for _ in range(4)]
        count = 0
        for chorale in chorales:
            count += 1
            for v, voice in enumerate(chorale.voices):
                seen[v].update(voice)
        if count == 0:
            raise ValueError("need at least one chorale to build a vocabulary")
        return cls(order=order, alpha=alpha, vocabs=seen)

    def fit(self, chorales: Sequence[Chorale]) -> None:
        """Replace counts with exact event counts over ``chorales``.

        Duplicates in the input count multiply. The vocabulary stays fixed:
        chorales using tokens outside it are rejected.
        """
        if not chorales:
            raise ValueError("cannot fit on an empty multiset")
        counts: list[dict[Context, dict[Token, int]]] = [{} for _ in range(4)]
        totals: list[dict[Context, int]] = [{} for _ in range(4)]
        for chorale in chorales:
            for v, context, tok in iter_token_events(chorale, self.order):
                if tok not in self._index[v]:
                    raise ValueError(f"chorale {chorale.id!r}: token {tok!r} not in voice {v} vocabulary")
                by_tok = counts[v].setdefault(context, {})
                by_tok[tok] = by_tok.get(tok, 0) + 1
                totals[v][context] = totals[v].get(context, 0) + 1
        self._counts = counts
        self._totals = totals

    def next_token_dist(self, voice: int, context: Context) -> np.ndarray:
        """P(token | context) over the voice vocabulary; sums to 1."""
        vocab = self.vocabs[voice]
        probs = np.full(len(vocab), self.alpha, dtype=float)
        by_tok = self._counts[voice].get(context)
        if by_tok:
            for tok, count in by_tok.items():
                probs[self._index[voice][tok]] += count
        total = self._totals[voice].get(context, 0) + self.alpha * len(vocab)
        return probs / total

    def token_logprob(self, voice: int, context: Context, tok: Token) -> float:
        """log P(token | context); tokens outside the vocabulary score as
        zero-count events so held-out scoring stays finite."""
        count = self._counts[voice].get(context, {}).get(tok, 0)
        total = self._totals[voice].get(context, 0)
        vocab_size = len(self.vocabs[voice])
        return float(np.log((count + self.alpha) / (total + self.alpha * vocab_size)))

    def sample(self, length: int, rng: np.random.Generator, chorale_id: str = "sample") -> Chorale:
        if length < 1:
            raise ValueError(f"length must be >= 1, got {length}")
        history: list[list[Token]] = [[START] * self.order for _ in range(4)]
        for t in range(length):
            step: Context = ()
            for v in range(4):
                context = tuple(history[v][-self.order :]) + step
                probs = self.next_token_dist(v, context)
                if t == 0 or history[v][-1] == REST:
                    hold_idx = self._index[v].get(HOLD)
                    if hold_idx is not None:
                        probs = probs.copy()
                        probs[hold_idx] = 0.0
                mass = probs.sum()
                if mass <= 0.0:
                    # every admissible token was masked out; rest is always legal
                    log.warning("all token mass masked for voice %d at t=%d; emitting REST", v, t)
                    tok: Token = REST
                else:
                    cdf = np.cumsum(probs / mass)
                    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
                    tok = self.vocabs[v][min(idx, len(self.vocabs[v]) - 1)]
                history[v].append(tok)
                step = step + (tok,)
        voices = tuple(tuple(h[self.order :]) for h in history)
        chorale = Chorale(id=chorale_id, voices=voices)
        assert not validate(chorale), "sampler produced an invalid chorale"
        return chorale

    def mean_nll(self, chorales: Sequence[Chorale]) -> float:
        """Mean −ln P(token | context) over all grid positions.

        Repeated objects (multiset draws) are scored once and reused.
        """
        if not chorales:
            raise ValueError("cannot score an empty corpus")
        cache: dict[int, tuple[float, int]] = {}
        total = 0.0
        positions = 0
        for chorale in chorales:
            key = id(chorale)
            if key not in cache:
                acc = 0.0
                n = 0
                for v, context, tok in iter_token_events(chorale, self.order):
                    acc -= self.token_logprob(v, context, tok)
                    n += 1
                cache[key] = (acc, n)
            acc, n = cache[key]
            total += acc
            positions += n
        return total / positions

    def train_epoch(self, dataset: Sequence[Chorale], plan: BatchPlan, rng: np.random.Generator) -> list[Chorale]:
        if not dataset:
            raise ValueError("cannot train on an empty dataset")
        draws = rng.integers(0, len(dataset), size=plan.draws_per_epoch)
        multiset = [dataset[int(i)] for i in draws]
        self.fit(multiset)
        return multiset

    def snapshot(self) -> object:
        return {
            "counts": copy.deepcopy(self._counts),
            "totals": copy.deepcopy(self._totals),
        }

    def restore(self, state: object) -> None:
        assert isinstance(state, dict) and "counts" in state and "totals" in state
        self._counts = copy.deepcopy(state["counts"])
        self._totals = copy.deepcopy(state["totals"])

    def save(self, path: str | Path) -> None:
        entries = []
        for v in range(4):
            for context, by_tok in self._counts[v].items():
                for tok, count in by_tok.items():
                    entries.append([v, list(context), tok, count])
        entries.sort(key=lambda e: (e[0], [token_to_str(x) if x != START else START for x in e[1]], token_to_str(e[2]) if e[2] != START else START))
        payload = {
            "format": _SNAPSHOT_FORMAT,
            "order": self.order,
            "alpha": self.alpha,
            "vocabs": [list(vocab) for vocab in self.vocabs],
            "counts": entries,
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "MarkovModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != _SNAPSHOT_FORMAT:
            raise ValueError(f"unrecognized model format {payload.get('format')!r}")
        model = cls(order=payload["order"], alpha=payload["alpha"], vocabs=[tuple(v) for v in payload["vocabs"]])
        for v, raw_context, tok, count in payload["counts"]:
            context = tuple(raw_context)
            by_tok = model._counts[v].setdefault(context, {})
            by_tok[tok] = count
            model._totals[v][context] = model._totals[v].get(context, 0) + count
        return model
