"""Musical feature extractors over the realized chorale grid.

Each extractor maps a valid chorale to a weighted empirical distribution of
real values. Six are registered:

* ``pitch`` -- MIDI pitches at note onsets, all voices pooled (weight
  proportional to onset count, not sustained duration).
* ``rhythm`` -- note durations in sixteenths, onset to the next
  onset/rest/end within the voice, pooled over voices.
* ``harmonic_interval`` -- absolute semitone gap between adjacent voice
  pairs (S-A, A-T, T-B) at every timestep where both sound.
* ``melodic_interval`` -- signed semitone step between consecutive onsets
  within a voice, pooled over voices.
* ``parallel_errors`` -- single value per chorale: parallel perfect
  fifth/octave count per 16 timesteps. An error occurs at consecutive
  timesteps for a voice pair when both voices sound at both timesteps,
  both change pitch, and the interval mod 12 is in {0, 7} at the first
  timestep and takes the same mod-12 value at the second.
* ``voice_crossing`` -- single value per chorale: fraction of timesteps at
  which some lower voice sounds strictly above a higher voice.

An extractor whose event set is empty (an all-rest chorale, say) returns
the designated empty-distribution sentinel; grading maps that to a fixed
penalty. Extractors ``pitch``..``melodic_interval`` are *pooled* features
(a corpus reference pools raw events); the last two are *per-chorale*
scalars (a corpus reference collects one value per chorale).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable

import math

from .chorale import HOLD, SILENT, Chorale, RealizedGrid, realize

_ADJACENT_PAIRS = ((0, 1), (1, 2), (2, 3))
_NORM_TOL = 1e-12


@dataclass(frozen=True)
class FeatureDistribution:
    """Weighted empirical distribution: sorted support, positive weights summing to 1."""

    feature_name: str
    support: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.support) != len(self.weights):
            raise ValueError("support and weights must have equal length")
        if not self.support:
            return
        for x in self.support:
            if not math.isfinite(x):
                raise ValueError(f"support value {x} is not finite")
        for w in self.weights:
            if not (w > 0 and math.isfinite(w)):
                raise ValueError(f"weight {w} must be strictly positive and finite")
        if any(a >= b for a, b in zip(self.support, self.support[1:])):
            raise ValueError("support must be strictly increasing")
        if abs(sum(self.weights) - 1.0) > _NORM_TOL:
            raise ValueError(f"weights sum to {sum(self.weights)!r}, expected 1")

    @classmethod
    def from_values(cls, name: str, values: Iterable[float]) -> "FeatureDistribution":
        """Empirical distribution of ``values``; duplicates merge into weight."""
        counts = Counter(float(v) for v in values)
        if not counts:
            return cls.empty(name)
        total = sum(counts.values())
        support = tuple(sorted(counts))
        return cls(name, support, tuple(counts[x] / total for x in support))

    @classmethod
    def point(cls, name: str, value: float) -> "FeatureDistribution":
        return cls(name, (float(value),), (1.0,))

    @classmethod
    def empty(cls, name: str) -> "FeatureDistribution":
        return cls(name, (), ())

    @property
    def is_empty(self) -> bool:
        return not self.support


def _pitch_events(grid: RealizedGrid) -> list[float]:
    return [float(p) for p in grid.pitches[grid.onsets]]


def _rhythm_events(chorale: Chorale) -> list[float]:
    durations = []
    for voice in chorale.voices:
        length = len(voice)
        for t, tok in enumerate(voice):
            if isinstance(tok, int):
                end = t + 1
                while end < length and voice[end] == HOLD:
                    end += 1
                durations.append(float(end - t))
    return durations


def _harmonic_events(grid: RealizedGrid) -> list[float]:
    intervals = []
    for hi, lo in _ADJACENT_PAIRS:
        for t in range(grid.length):
            a, b = int(grid.pitches[hi, t]), int(grid.pitches[lo, t])
            if a != SILENT and b != SILENT:
                intervals.append(float(abs(a - b)))
    return intervals


def _melodic_events(grid: RealizedGrid) -> list[float]:
    diffs = []
    for v in range(grid.pitches.shape[0]):
        onset_pitches = [int(p) for p, on in zip(grid.pitches[v], grid.onsets[v]) if on]
        diffs.extend(float(b - a) for a, b in zip(onset_pitches, onset_pitches[1:]))
    return diffs


def _parallel_error_value(grid: RealizedGrid) -> float | None:
    """Errors per 16 timesteps, or None when no voice pair ever moves in parallel view."""
    opportunities = 0
    errors = 0
    for i, j in combinations(range(grid.pitches.shape[0]), 2):
        for t in range(grid.length - 1):
            a0, a1 = int(grid.pitches[i, t]), int(grid.pitches[i, t + 1])
            b0, b1 = int(grid.pitches[j, t]), int(grid.pitches[j, t + 1])
            if SILENT in (a0, a1, b0, b1):
                continue
            opportunities += 1
            if a0 != a1 and b0 != b1:
                first = abs(a0 - b0) % 12
                second = abs(a1 - b1) % 12
                if first in (0, 7) and first == second:
                    errors += 1
    if opportunities == 0:
        return None
    return errors * 16.0 / grid.length


def _voice_crossing_value(grid: RealizedGrid) -> float | None:
    """Crossed fraction of timesteps, or None when no two voices ever sound together."""
    comparable = 0
    crossed = 0
    for t in range(grid.length):
        sounding = [int(p) for p in grid.pitches[:, t] if int(p) != SILENT]
        if len(sounding) < 2:
            continue
        comparable += 1
        pitches = grid.pitches[:, t]
        if any(
            int(pitches[j]) > int(pitches[i])
            for i, j in combinations(range(len(pitches)), 2)
            if int(pitches[i]) != SILENT and int(pitches[j]) != SILENT
        ):
            crossed += 1
    if comparable == 0:
        return None
    return crossed / grid.length


def pitch_feature(chorale: Chorale) -> FeatureDistribution:
    return FeatureDistribution.from_values("pitch", _pitch_events(realize(chorale)))


def rhythm_feature(chorale: Chorale) -> FeatureDistribution:
    realize(chorale)  # enforce validity like every other extractor
    return FeatureDistribution.from_values("rhythm", _rhythm_events(chorale))


def harmonic_interval_feature(chorale: Chorale) -> FeatureDistribution:
    return FeatureDistribution.from_values("harmonic_interval", _harmonic_events(realize(chorale)))


def melodic_interval_feature(chorale: Chorale) -> FeatureDistribution:
    return FeatureDistribution.from_values("melodic_interval", _melodic_events(realize(chorale)))


def parallel_error_feature(chorale: Chorale) -> FeatureDistribution:
    value = _parallel_error_value(realize(chorale))
    if value is None:
        return FeatureDistribution.empty("parallel_errors")
    return FeatureDistribution.point("parallel_errors", value)


def voice_crossing_feature(chorale: Chorale) -> FeatureDistribution:
    value = _voice_crossing_value(realize(chorale))
    if value is None:
        return FeatureDistribution.empty("voice_crossing")
    return FeatureDistribution.point("voice_crossing", value)


@dataclass(frozen=True)
class FeatureSpec:
    extractor: Callable[[Chorale], FeatureDistribution]
    pooled: bool  # pooled over corpus events vs one scalar per chorale


REGISTRY: dict[str, FeatureSpec] = {
    "pitch": FeatureSpec(pitch_feature, pooled=True),
    "rhythm": FeatureSpec(rhythm_feature, pooled=True),
    "harmonic_interval": FeatureSpec(harmonic_interval_feature, pooled=True),
    "melodic_interval": FeatureSpec(melodic_interval_feature, pooled=True),
    "parallel_errors": FeatureSpec(parallel_error_feature, pooled=False),
    "voice_crossing": FeatureSpec(voice_crossing_feature, pooled=False),
}

DEFAULT_FEATURES: tuple[str, ...] = tuple(REGISTRY)


def check_feature_set(names: Iterable[str]) -> tuple[str, ...]:
    names = tuple(names)
    if not names:
        raise ValueError("feature set must not be empty")
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        raise ValueError(f"unknown feature(s) {unknown}; registry has {sorted(REGISTRY)}")
    if len(set(names)) != len(names):
        raise ValueError("feature set has duplicates")
    return names


def extract(chorale: Chorale, name: str) -> FeatureDistribution:
    return REGISTRY[name].extractor(chorale)


def feature_events(chorale: Chorale, name: str) -> list[float]:
    """Raw event values of a pooled feature, one entry per event."""
    spec = REGISTRY[name]
    if not spec.pooled:
        raise ValueError(f"{name} is a per-chorale feature; it has no event pool")
    grid = realize(chorale)
    if name == "pitch":
        return _pitch_events(grid)
    if name == "rhythm":
        return _rhythm_events(chorale)
    if name == "harmonic_interval":
        return _harmonic_events(grid)
    return _melodic_events(grid)
