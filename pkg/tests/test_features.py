import pytest
from hypothesis import given
import hypothesis.strategies as st

from auggen.chorale import HOLD, REST, Chorale, transpose
from auggen.features import (
    DEFAULT_FEATURES,
    REGISTRY,
    FeatureDistribution,
    extract,
    feature_events,
    melodic_interval_feature,
    parallel_error_feature,
    pitch_feature,
    rhythm_feature,
    voice_crossing_feature,
)
from conftest import chorales
from oracles import brute_parallel_count


def quad(*voices):
    return Chorale(id="c", voices=tuple(voices))


def whole_note(pitch, length=4):
    return (pitch,) + (HOLD,) * (length - 1)


def rests(length):
    return (REST,) * length


class TestFeatureDistribution:
    def test_normalizes_and_merges(self):
        dist = FeatureDistribution.from_values("x", [3, 1, 3, 3])
        assert dist.support == (1.0, 3.0)
        assert dist.weights == (0.25, 0.75)

    def test_rejects_bad_construction(self):
        with pytest.raises(ValueError):
            FeatureDistribution("x", (1.0, 1.0), (0.5, 0.5))  # non-increasing support
        with pytest.raises(ValueError):
            FeatureDistribution("x", (1.0, 2.0), (0.5, 0.6))  # weights sum > 1
        with pytest.raises(ValueError):
            FeatureDistribution("x", (1.0,), (0.0,))  # zero weight
        with pytest.raises(ValueError):
            FeatureDistribution("x", (float("inf"),), (1.0,))

    def test_empty_sentinel(self):
        dist = FeatureDistribution.empty("x")
        assert dist.is_empty
        assert not FeatureDistribution.point("x", 0.0).is_empty


def test_whole_note_chorale_has_no_parallel_errors():
    c = quad(whole_note(72), whole_note(67), whole_note(64), whole_note(60))
    dist = parallel_error_feature(c)
    assert dist.support == (0.0,) and dist.weights == (1.0,)


def test_parallel_octaves_normalized_per_16():
    # S and B move 72->74 over 60->62: octave at both steps, both voices move
    c = quad((72, 74), rests(2), rests(2), (60, 62))
    dist = parallel_error_feature(c)
    assert dist.support == (8.0,)  # 1 error in 2 timesteps = 8 per 16


def test_rhythm_and_pitch_point_masses():
    c = quad((60, HOLD, HOLD, HOLD), rests(4), rests(4), rests(4))
    assert rhythm_feature(c).support == (4.0,)
    assert pitch_feature(c).support == (60.0,)


def test_melodic_intervals_signed():
    c = quad((60, 64, 60), rests(3), rests(3), rests(3))
    dist = melodic_interval_feature(c)
    assert dist.support == (-4.0, 4.0)
    assert dist.weights == (0.5, 0.5)


def test_harmonic_intervals_adjacent_pairs_only():
    c = quad((72,), (67,), rests(1), (60,))
    # only S-A sounds as an adjacent pair; T is silent so A-T and T-B drop out
    dist = extract(c, "harmonic_interval")
    assert dist.support == (5.0,)


def test_voice_crossing_fraction():
    c = quad((60, 60), (65, 55), rests(2), rests(2))
    dist = voice_crossing_feature(c)
    assert dist.support == (0.5,)  # alto above soprano at t=0 only


def test_all_rest_chorale_hits_every_sentinel():
    c = quad(rests(3), rests(3), rests(3), rests(3))
    for name in DEFAULT_FEATURES:
        assert extract(c, name).is_empty, name


def test_single_timestep_chorale_parallel_sentinel():
    c = quad((60,), (55,), (48,), (41,))
    assert parallel_error_feature(c).is_empty  # no consecutive timesteps to inspect
    assert not voice_crossing_feature(c).is_empty


@given(chorales(max_length=8))
def test_distributions_normalized(c):
    for name in DEFAULT_FEATURES:
        dist = extract(c, name)
        if not dist.is_empty:
            assert abs(sum(dist.weights) - 1.0) <= 1e-12


@given(chorales(max_length=8), st.integers(-5, 5))
def test_transposition_shifts_only_pitch(c, k):
    shifted = transpose(c, k)
    base_pitch = extract(c, "pitch")
    shifted_pitch = extract(shifted, "pitch")
    assert shifted_pitch.is_empty == base_pitch.is_empty
    if not base_pitch.is_empty:
        assert shifted_pitch.support == tuple(x + k for x in base_pitch.support)
        assert shifted_pitch.weights == base_pitch.weights
    for name in ("rhythm", "harmonic_interval", "melodic_interval", "parallel_errors", "voice_crossing"):
        assert extract(shifted, name) == extract(c, name), name


@given(chorales(max_length=8))
def test_parallel_error_feature_matches_brute_force(c):
    opportunities, errors = brute_parallel_count(c)
    dist = parallel_error_feature(c)
    if opportunities == 0:
        assert dist.is_empty
    else:
        assert dist.support == (errors * 16.0 / c.length,)


@given(chorales(max_length=6))
def test_feature_events_consistent_with_extractor(c):
    for name in DEFAULT_FEATURES:
        if not REGISTRY[name].pooled:
            continue
        events = feature_events(c, name)
        dist = extract(c, name)
        assert FeatureDistribution.from_values(name, events) == dist


def test_feature_events_rejects_point_features(desk_corpus):
    with pytest.raises(ValueError):
        feature_events(desk_corpus.chorales[0], "voice_crossing")
