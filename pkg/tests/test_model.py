import math

import numpy as np
import pytest
from hypothesis import given

from auggen.chorale import HOLD, REST, Chorale, validate
from auggen.model import START, BatchPlan, MarkovModel, iter_token_events
from auggen.rng import stream
from conftest import chorales

TINY = 1e-12


def ascending(start, length=8):
    """One strictly-rising line per voice: every Markov context is unique."""
    return Chorale(
        id=f"asc{start}",
        voices=tuple(tuple(start - 12 * v + i for i in range(length)) for v in range(4)),
    )


def quad(*voices_):
    return Chorale(id="c", voices=tuple(voices_))


class TestFitCounts:
    def test_duplicates_count_multiply(self):
        c = ascending(60)
        single = MarkovModel.with_vocab_from([c], order=2, alpha=0.1)
        single.fit([c])
        double = MarkovModel.with_vocab_from([c], order=2, alpha=0.1)
        double.fit([c, c])
        for v in range(4):
            assert set(double._counts[v]) == set(single._counts[v])
            for ctx, by_tok in single._counts[v].items():
                assert double._counts[v][ctx] == {tok: 2 * n for tok, n in by_tok.items()}

    def test_fit_rejects_empty(self):
        model = MarkovModel.with_vocab_from([ascending(60)], order=1, alpha=0.1)
        with pytest.raises(ValueError):
            model.fit([])

    def test_fit_rejects_out_of_vocabulary_tokens(self):
        model = MarkovModel.with_vocab_from([ascending(60)], order=1, alpha=0.1)
        with pytest.raises(ValueError) as err:
            model.fit([ascending(100)])
        assert "vocabulary" in str(err.value)

    def test_additive_smoothing_formula(self):
        # soprano vocab {60, 62}; context (60,) seen 4 times: 62 thrice, 60 once
        c = quad(
            (60, 62, 60, 62, 60, 62, 60, 60),
            (41,) * 8,
            (41,) * 8,
            (41,) * 8,
        )
        model = MarkovModel.with_vocab_from([c], order=1, alpha=1.0)
        model.fit([c])
        probs = model.next_token_dist(0, (60,))
        by_token = dict(zip(model.vocabs[0], probs))
        assert by_token[62] == pytest.approx((3 + 1) / (4 + 2))
        assert by_token[60] == pytest.approx((1 + 1) / (4 + 2))

    def test_order1_deterministic_transition(self):
        c = quad((60, 62, 60, 62), (41,) * 4, (41,) * 4, (41,) * 4)
        model = MarkovModel.with_vocab_from([c], order=1, alpha=TINY)
        model.fit([c])
        probs = model.next_token_dist(0, (60,))
        assert probs[model.vocabs[0].index(62)] == pytest.approx(1.0, abs=1e-9)


class TestNextTokenDist:
    def test_unseen_context_is_uniform(self):
        model = MarkovModel.with_vocab_from([ascending(60)], order=2, alpha=0.5)
        model.fit([ascending(60)])
        probs = model.next_token_dist(0, (1, 2))
        assert np.allclose(probs, 1.0 / len(model.vocabs[0]))

    def test_normalization_at_random_contexts(self, desk_split):
        model = MarkovModel.with_vocab_from(desk_split.train, order=2, alpha=0.1)
        model.fit(list(desk_split.train))
        rng = stream(5, "contexts")
        for v in range(4):
            vocab = model.vocabs[v] + (START,)
            for _ in range(125):
                context = tuple(vocab[int(i)] for i in rng.integers(0, len(vocab), size=2 + v))
                assert abs(model.next_token_dist(v, context).sum() - 1.0) <= 1e-12


class TestSample:
    def test_sampling_deterministic_given_stream(self, desk_split):
        model = MarkovModel.with_vocab_from(desk_split.train, order=2, alpha=0.1)
        model.fit(list(desk_split.train))
        a = model.sample(20, stream(3, "s"), chorale_id="a")
        b = model.sample(20, stream(3, "s"), chorale_id="b")
        assert a.voices == b.voices

    def test_samples_always_valid(self, desk_split):
        model = MarkovModel.with_vocab_from(desk_split.train, order=2, alpha=0.1)
        model.fit(list(desk_split.train))
        rng = stream(4, "validity")
        for i in range(200):
            assert validate(model.sample(int(rng.integers(1, 40)), rng)) == []

    def test_near_zero_alpha_reproduces_training_chorale(self):
        # rising lines keep every context unique, so the fitted conditionals
        # are point masses and sampling must replay the chorale
        source = Chorale(
            id="src",
            voices=(
                (72, HOLD, 74, HOLD, 76, 77, HOLD, 79),
                (67, 69, HOLD, 71, REST, 72, 74, HOLD),
                (60, HOLD, HOLD, 62, 64, HOLD, 65, 67),
                (48, 50, 52, HOLD, 53, 55, REST, 57),
            ),
        )
        transitions = {}
        for v, ctx, tok in iter_token_events(source, 2):
            assert transitions.setdefault((v, ctx), tok) == tok
        model = MarkovModel.with_vocab_from([source], order=2, alpha=TINY)
        model.fit([source])
        clone = model.sample(source.length, stream(0, "clone"))
        assert clone.voices == source.voices


class TestMeanNll:
    def test_zero_on_deterministic_training_data(self):
        c = ascending(72, length=10)
        model = MarkovModel.with_vocab_from([c], order=2, alpha=TINY)
        model.fit([c])
        assert model.mean_nll([c]) < 1e-9

    def test_uniform_model_scores_log_vocab(self):
        c = ascending(72, length=6)
        model = MarkovModel.with_vocab_from([c], order=2, alpha=0.3)  # zero counts: uniform
        for v in range(4):
            assert len(model.vocabs[v]) == 6
        assert model.mean_nll([c]) == pytest.approx(math.log(6), abs=1e-12)

    def test_finite_on_out_of_vocabulary_corpus(self, desk_split):
        model = MarkovModel.with_vocab_from(desk_split.train, order=2, alpha=0.1)
        model.fit(list(desk_split.train))
        alien = Chorale(id="alien", voices=((120, 121, 122),) * 4)
        value = model.mean_nll([alien])
        assert math.isfinite(value) and value > 0

    @given(chorales(min_length=2, max_length=6), chorales(min_length=2, max_length=6))
    def test_fit_model_beats_uniform_on_training_data(self, c, d):
        corpus = [c, Chorale(id=c.id + "-b", voices=d.voices)]
        fitted = MarkovModel.with_vocab_from(corpus, order=2, alpha=TINY)
        fitted.fit(corpus)
        uniform = MarkovModel.with_vocab_from(corpus, order=2, alpha=TINY)
        assert fitted.mean_nll(corpus) <= uniform.mean_nll(corpus) + 1e-9


class TestTrainEpoch:
    def test_single_chorale_dataset_multiset(self):
        c = ascending(60)
        model = MarkovModel.with_vocab_from([c], order=2, alpha=0.1)
        plan = BatchPlan(batches=3, batch_size=4)
        multiset = model.train_epoch([c], plan, stream(1, "t"))
        assert len(multiset) == 12 and all(m is c for m in multiset)
        direct = MarkovModel.with_vocab_from([c], order=2, alpha=0.1)
        direct.fit([c] * 12)
        assert direct._counts == model._counts

    def test_same_stream_same_counts(self, desk_split):
        chorales_ = list(desk_split.train)
        plan = BatchPlan(batches=8, batch_size=2)
        a = MarkovModel.with_vocab_from(chorales_, order=2, alpha=0.1)
        a.train_epoch(chorales_, plan, stream(6, "epoch"))
        b = MarkovModel.with_vocab_from(chorales_, order=2, alpha=0.1)
        b.train_epoch(chorales_, plan, stream(6, "epoch"))
        assert a._counts == b._counts

    def test_draw_frequencies_uniform_within_3_sigma(self):
        dataset = [ascending(60 + i) for i in range(5)]
        model = MarkovModel.with_vocab_from(dataset, order=1, alpha=0.1)
        plan = BatchPlan(batches=200, batch_size=10)  # 2000 draws, p = 0.2 each
        multiset = model.train_epoch(dataset, plan, stream(11, "multinomial"))
        expected = 2000 * 0.2
        sigma = math.sqrt(2000 * 0.2 * 0.8)
        for member in dataset:
            observed = sum(1 for m in multiset if m is member)
            assert abs(observed - expected) <= 3 * sigma

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            BatchPlan(batches=0, batch_size=1)
        with pytest.raises(ValueError):
            BatchPlan(batches=1, batch_size=0)


class TestSnapshotAndSerialization:
    def test_snapshot_restore_roundtrip(self, desk_split):
        chorales_ = list(desk_split.train)
        model = MarkovModel.with_vocab_from(chorales_, order=2, alpha=0.1)
        model.fit(chorales_[:10])
        state = model.snapshot()
        before = {v: dict(model._counts[v]) for v in range(4)}
        model.fit(chorales_[10:20])
        model.restore(state)
        fresh = MarkovModel.with_vocab_from(chorales_, order=2, alpha=0.1)
        fresh.fit(chorales_[:10])
        rng = stream(8, "spot")
        for v in range(4):
            vocab = model.vocabs[v] + (START,)
            for _ in range(25):
                context = tuple(vocab[int(i)] for i in rng.integers(0, len(vocab), size=2 + v))
                assert np.array_equal(model.next_token_dist(v, context), fresh.next_token_dist(v, context))
        assert {v: dict(model._counts[v]) for v in range(4)} == before

    def test_save_load_roundtrip(self, desk_split, tmp_path):
        chorales_ = list(desk_split.train)
        model = MarkovModel.with_vocab_from(chorales_, order=2, alpha=0.1)
        model.fit(chorales_)
        path = tmp_path / "model.json"
        model.save(path)
        loaded = MarkovModel.load(path)
        assert loaded.order == model.order and loaded.alpha == model.alpha
        assert loaded.vocabs == model.vocabs
        assert loaded._counts == model._counts
        assert loaded._totals == model._totals

    def test_load_rejects_unknown_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "nope"}', encoding="utf-8")
        with pytest.raises(ValueError):
            MarkovModel.load(path)


class TestConstruction:
    def test_parameter_validation(self):
        c = ascending(60)
        with pytest.raises(ValueError):
            MarkovModel.with_vocab_from([c], order=0, alpha=0.1)
        with pytest.raises(ValueError):
            MarkovModel.with_vocab_from([c], order=1, alpha=0.0)
        with pytest.raises(ValueError):
            MarkovModel.with_vocab_from([], order=1, alpha=0.1)

    def test_start_never_in_vocabulary(self, desk_split):
        model = MarkovModel.with_vocab_from(desk_split.train, order=2, alpha=0.1)
        for vocab in model.vocabs:
            assert START not in vocab
