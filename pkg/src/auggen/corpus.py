"""Corpus loading/saving, deterministic splitting, and synthetic corpora.

The split shuffle is a keyed-hash permutation: indices are ordered by
SHA-256 of ``"{seed}:{index}"`` before the cut. This is specified here so
the procedure is auditable and gives the same split on any platform or
library version, forever.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .chorale import HOLD, REST, Chorale, Token, parse_chorale, serialize_chorale, validate
from .model import MarkovModel
from .rng import stream


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Corpus:
    """Ordered collection of valid chorales with unique ids."""

    chorales: tuple[Chorale, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "chorales", tuple(self.chorales))
        seen: set[str] = set()
        for chorale in self.chorales:
            if chorale.id in seen:
                raise CorpusError(f"duplicate chorale id {chorale.id!r}")
            seen.add(chorale.id)
            violations = validate(chorale)
            if violations:
                raise CorpusError(f"chorale {chorale.id!r} is invalid: {violations[0]}")

    def __len__(self) -> int:
        return len(self.chorales)

    def __iter__(self):
        return iter(self.chorales)

    def ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.chorales)

    def digest(self) -> str:
        """SHA-256 over the serialized records; id-order sensitive."""
        h = hashlib.sha256()
        for chorale in self.chorales:
            h.update(serialize_chorale(chorale).encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()


@dataclass(frozen=True)
class Split:
    train: Corpus
    validation: Corpus
    seed: int
    fraction: float


def load_corpus(path: str | Path) -> Corpus:
    chorales = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            chorales.append(parse_chorale(line, line=line_no))
    return Corpus(tuple(chorales))


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for chorale in corpus:
            fh.write(serialize_chorale(chorale))
            fh.write("\n")


def _shuffled_indices(n: int, seed: int) -> list[int]:
    return sorted(range(n), key=lambda i: hashlib.sha256(f"{seed}:{i}".encode("ascii")).digest())


def split(corpus: Corpus, fraction: float, seed: int) -> Split:
    """Deterministic train/validation split; |train| = floor(fraction * n)."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n = len(corpus)
    if n < 2:
        raise CorpusError(f"corpus of size {n} cannot be split into nonempty parts")
    n_train = math.floor(fraction * n)
    if n_train < 1 or n_train > n - 1:
        raise CorpusError(f"fraction {fraction} of {n} chorales leaves an empty part")
    order = _shuffled_indices(n, seed)
    train = Corpus(tuple(corpus.chorales[i] for i in order[:n_train]))
    validation = Corpus(tuple(corpus.chorales[i] for i in order[n_train:]))
    return Split(train=train, validation=validation, seed=seed, fraction=fraction)


def split_manifest(s: Split) -> dict:
    return {
        "seed": s.seed,
        "fraction": s.fraction,
        "train_ids": list(s.train.ids()),
        "validation_ids": list(s.validation.ids()),
    }


def save_split_manifest(s: Split, path: str | Path) -> None:
    Path(path).write_text(json.dumps(split_manifest(s), sort_keys=True) + "\n", encoding="utf-8")


def apply_split_manifest(corpus: Corpus, manifest: dict) -> Split:
    """Rebuild a Split from a manifest produced by :func:`split_manifest`."""
    by_id = {c.id: c for c in corpus}
    try:
        train = Corpus(tuple(by_id[i] for i in manifest["train_ids"]))
        validation = Corpus(tuple(by_id[i] for i in manifest["validation_ids"]))
    except KeyError as exc:
        raise CorpusError(f"manifest references unknown chorale id {exc.args[0]!r}") from exc
    return Split(train=train, validation=validation, seed=manifest["seed"], fraction=manifest["fraction"])


# ---------------------------------------------------------------------------
# Synthetic teacher corpus
# ---------------------------------------------------------------------------

_MAJOR_SCALE = (0, 2, 4, 5, 7, 9, 11)
_CONSONANT_CLASSES = (0, 3, 4, 7, 8, 9)  # unison/octave, thirds, fifths, sixths


@dataclass(frozen=True)
class TeacherParams:
    """Knobs for the fixed synthetic teacher model.

    The teacher is an order-``order`` Markov model fit on seeded chorale-like
    walks: the soprano performs a diatonic step walk and the lower voices
    track it, choosing in-register support consonant with the soprano and
    below the voice above. Desk-scale corpora therefore carry melodic,
    rhythmic, and cross-voice regularities a student model has to earn.
    """

    voice_ranges: tuple[tuple[int, int], ...] = ((60, 79), (55, 74), (48, 67), (41, 60))
    scale: tuple[int, ...] = _MAJOR_SCALE
    hold_prob: float = 0.45
    rest_prob: float = 0.02
    follow_hold_prob: float = 0.85  # lower voices hold while the soprano holds
    max_leap: int = 5  # semitone cap on lower-voice motion
    step_weights: tuple[float, ...] = (0.1, 0.3, 0.2, 0.3, 0.1)  # soprano scale steps -2..+2
    # the teacher sees far more walks than any desk-scale student sees
    # chorales, so its context coverage is dense and its output clean
    n_seed_walks: int = 400
    order: int = 2
    smoothing: float = 0.01


def _voice_pitch_pool(low: int, high: int, scale: tuple[int, ...]) -> list[int]:
    pool = [p for p in range(low, high + 1) if p % 12 in scale]
    if not pool:
        raise ValueError(f"no scale pitches in range {low}..{high}")
    return pool


def _draw_step(params: TeacherParams, rng) -> int:
    steps = range(-(len(params.step_weights) // 2), len(params.step_weights) // 2 + 1)
    total = sum(params.step_weights)
    pick = rng.random()
    cdf = 0.0
    for step, weight in zip(steps, params.step_weights):
        cdf += weight / total
        if pick < cdf:
            return step
    return 0


def _support_pitch(pool: list[int], prev: int | None, soprano: int | None,
                   upper_motion: list[tuple[int | None, int | None]],
                   ceiling: int | None, max_leap: int, rng) -> int:
    """Pick a lower-voice pitch: near the previous one, consonant with the
    soprano without moving in parallel perfect intervals against any upper
    voice, and not above the voice directly above; constraints relax in
    that order if nothing qualifies."""

    def makes_parallel(p: int) -> bool:
        if prev is None or p == prev:
            return False
        for upper_prev, upper_now in upper_motion:
            if upper_prev is None or upper_now is None or upper_prev == upper_now:
                continue
            before = abs(upper_prev - prev) % 12
            if before in (0, 7) and before == abs(upper_now - p) % 12:
                return True
        return False

    def admissible(require_leap: bool, require_consonance: bool) -> list[int]:
        out = []
        for p in pool:
            if ceiling is not None and p > ceiling:
                continue
            if require_leap and prev is not None and abs(p - prev) > max_leap:
                continue
            if require_consonance:
                if soprano is not None and abs(soprano - p) % 12 not in _CONSONANT_CLASSES:
                    continue
                if makes_parallel(p):
                    continue
            out.append(p)
        return out

    for require_leap, require_consonance in ((True, True), (False, True), (True, False), (False, False)):
        candidates = admissible(require_leap, require_consonance)
        if candidates:
            return candidates[int(rng.integers(0, len(candidates)))]
    return pool[int(rng.integers(0, len(pool)))]


def _teacher_walk(length: int, params: TeacherParams, rng) -> Chorale:
    pools = [_voice_pitch_pool(low, high, params.scale) for low, high in params.voice_ranges]
    voices: list[list[Token]] = [[] for _ in range(4)]
    sounding: list[int | None] = [None] * 4
    sop_idx = len(pools[0]) // 2

    for t in range(length):
        previous = list(sounding)
        roll = rng.random()
        if roll < params.rest_prob:
            sop_tok: Token = REST
        elif t > 0 and voices[0][-1] != REST and roll < params.rest_prob + params.hold_prob:
            sop_tok = HOLD
        else:
            sop_idx = min(max(sop_idx + _draw_step(params, rng), 0), len(pools[0]) - 1)
            sop_tok = pools[0][sop_idx]
        voices[0].append(sop_tok)
        sounding[0] = None if sop_tok == REST else (sounding[0] if sop_tok == HOLD else sop_tok)
        soprano_moved = isinstance(sop_tok, int)

        for v in range(1, 4):
            can_hold = t > 0 and voices[v][-1] != REST and sounding[v] is not None
            if rng.random() < params.rest_prob:
                tok: Token = REST
            elif can_hold and not soprano_moved and rng.random() < params.follow_hold_prob:
                tok = HOLD
            else:
                upper_motion = [(previous[u], sounding[u]) for u in range(v)]
                tok = _support_pitch(
                    pools[v], sounding[v], sounding[0], upper_motion, sounding[v - 1], params.max_leap, rng
                )
            voices[v].append(tok)
            sounding[v] = None if tok == REST else (sounding[v] if tok == HOLD else tok)

    return Chorale(id="walk", voices=tuple(tuple(v) for v in voices))


def teacher_model(seed: int, params: TeacherParams = TeacherParams()) -> MarkovModel:
    """Deterministically construct the teacher from seeded walks."""
    rng = stream(seed, "teacher", "walks")
    walks = []
    lo, hi = 32, 48
    for i in range(params.n_seed_walks):
        length = lo + (i * (hi - lo)) // max(1, params.n_seed_walks - 1)
        walks.append(_teacher_walk(length, params, rng))
    model = MarkovModel.with_vocab_from(walks, order=params.order, alpha=params.smoothing)
    model.fit(walks)
    return model


def teacher_corpus(
    seed: int,
    n: int,
    length_range: tuple[int, int] = (32, 48),
    params: TeacherParams = TeacherParams(),
) -> Corpus:
    """Sample ``n`` valid chorales from the fixed seeded teacher model."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    t_min, t_max = length_range
    if t_min < 4:
        raise ValueError(f"minimum length must be >= 4, got {t_min}")
    if t_max < t_min:
        raise ValueError(f"empty length range {length_range}")
    teacher = teacher_model(seed, params)
    chorales = []
    for i in range(n):
        rng = stream(seed, "teacher", "sample", i)
        length = t_min + int(rng.integers(0, t_max - t_min + 1))
        chorales.append(teacher.sample(length, rng, chorale_id=f"teacher-{i:04d}"))
    return Corpus(tuple(chorales))
