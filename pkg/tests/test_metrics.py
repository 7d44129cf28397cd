from __future__ import annotations

import itertools
import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialogcut.metrics import (
    DiarizedTranscript,
    JudgeScores,
    SampleMetrics,
    SpeakerEmbeddingSet,
    aggregate_report,
    cp_wer,
    f1_overlap,
    label_recall,
    parse_judge_scores,
    sa_sim,
    wer,
)
from dialogcut.errors import (
    DimensionMismatch,
    EmptyInput,
    EmptyPartition,
    EmptyReference,
    SchemaViolation,
    ScoreOutOfRange,
    TooManySpeakers,
    UnknownGoldLabel,
)
from dialogcut.subtitles import DEFAULT_POLICY


# --- independent oracles -------------------------------------------------

def naive_edit_distance(a, b):
    """Full-matrix DP, written separately from the implementation under test."""
    rows, cols = len(a) + 1, len(b) + 1
    d = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        d[i][0] = i
    for j in range(cols):
        d[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
    return d[-1][-1]


def brute_force_cp_wer(reference, hypothesis):
    """Exhaustive mapping enumeration with the naive DP above."""
    ref: dict[str, list[str]] = {}
    for speaker, text in reference:
        ref.setdefault(speaker, []).extend(text.lower().split())
    hyp: dict[str, list[str]] = {}
    for speaker, text in hypothesis:
        hyp.setdefault(speaker, []).extend(text.lower().split())
    total_ref = sum(len(w) for w in ref.values())
    ref_lists = list(ref.values())
    hyp_lists = list(hyp.values())
    size = max(len(ref_lists), len(hyp_lists))
    ref_lists += [[]] * (size - len(ref_lists))
    hyp_lists += [[]] * (size - len(hyp_lists))
    best = None
    for perm in itertools.permutations(range(size)):
        total = sum(naive_edit_distance(ref_lists[i], hyp_lists[perm[i]]) for i in range(size))
        best = total if best is None else min(best, total)
    return best / total_ref


def random_diarized(rng: random.Random, max_speakers: int = 4, max_words: int = 30):
    vocab = ["red", "blue", "green", "loud", "quiet", "run", "stop", "go", "now", "later"]
    n_speakers = rng.randint(1, max_speakers)
    speakers = [f"spk{i}" for i in range(n_speakers)]
    utterances = []
    words_left = rng.randint(n_speakers, max_words)
    while words_left > 0:
        k = rng.randint(1, min(4, words_left))
        words_left -= k
        utterances.append(
            (rng.choice(speakers), " ".join(rng.choice(vocab) for _ in range(k)))
        )
    return utterances


def corrupt(utterances, rng: random.Random):
    vocab = ["red", "blue", "green", "zzz", "qqq"]
    out = []
    for speaker, text in utterances:
        words = text.split()
        if words and rng.random() < 0.5:
            words[rng.randrange(len(words))] = rng.choice(vocab)
        if rng.random() < 0.2:
            words.append(rng.choice(vocab))
        out.append((speaker, " ".join(words) if words else text))
    return out


# --- f1_overlap -----------------------------------------------------------

class TestF1Overlap:
    def test_identical(self):
        a = [(0, 10), (10, 25)]
        assert f1_overlap(a, a) == pytest.approx(1.0)

    def test_hand_example(self):
        a = [(0, 10)]
        b = [(0, 5), (5, 10)]
        # P(A,B) = 5/10 (best single overlap), P(B,A) = 1.0
        assert f1_overlap(a, b) == pytest.approx(2 * 0.5 * 1.0 / 1.5, abs=1e-4)

    def test_disjoint_zero(self):
        assert f1_overlap([(0, 10)], [(20, 30)]) == 0.0

    def test_empty_raises(self):
        with pytest.raises(EmptyPartition):
            f1_overlap([], [(0, 1)])
        with pytest.raises(EmptyPartition):
            f1_overlap([(0, 1)], [])

    def test_invalid_interval_raises(self):
        with pytest.raises(EmptyPartition):
            f1_overlap([(5, 5)], [(0, 1)])
        with pytest.raises(EmptyPartition):
            f1_overlap([(0, 5), (3, 8)], [(0, 8)])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(min_value=1, max_value=20), min_size=1, max_size=10),
           st.lists(st.integers(min_value=1, max_value=20), min_size=1, max_size=10))
    def test_symmetry_and_identity(self, lens_a, lens_b):
        def build(lens):
            out, cursor = [], 0
            for ln in lens:
                out.append((cursor, cursor + ln))
                cursor += ln
            return out

        a, b = build(lens_a), build(lens_b)
        assert f1_overlap(a, a) == pytest.approx(1.0)
        assert f1_overlap(a, b) == pytest.approx(f1_overlap(b, a), abs=1e-12)

    def test_refinement_decreases(self):
        a = [(0, 10), (10, 20)]
        refined = [(0, 5), (5, 10), (10, 20)]
        assert f1_overlap(a, refined) < 1.0


# --- wer -------------------------------------------------------------------

class TestWer:
    def test_identity(self):
        assert wer("the cat sat", "the cat sat") == 0.0

    def test_deletion(self):
        assert wer("the cat sat", "the cat") == pytest.approx(1 / 3)

    def test_sub_plus_insert(self):
        # DP table verified by the independent naive implementation
        assert wer("a b c d", "a x c d e") == pytest.approx(0.5)
        assert naive_edit_distance("a b c d".split(), "a x c d e".split()) == 2

    def test_normalization_applies(self):
        assert wer("Hello, WORLD!", "hello world") == 0.0

    def test_can_exceed_one(self):
        assert wer("one", "a b c d") > 1.0

    def test_empty_reference(self):
        with pytest.raises(EmptyReference):
            wer("...", "something")


# --- cp_wer ------------------------------------------------------------------

def transcript(rows) -> DiarizedTranscript:
    return DiarizedTranscript(utterances=tuple(rows))


class TestCpWer:
    def test_identity(self):
        t = transcript([("A", "alpha beta"), ("B", "gamma delta")])
        assert cp_wer(t, t) == 0.0

    def test_label_swap_is_free(self):
        ref = transcript([("A", "alpha beta"), ("B", "gamma delta")])
        hyp = transcript([("B", "alpha beta"), ("A", "gamma delta")])
        assert cp_wer(ref, hyp) == 0.0

    def test_single_substitution(self):
        ref = transcript([
            ("A", "alpha beta gamma delta epsilon"),
            ("B", "one two three four five"),
        ])
        hyp = transcript([
            ("A", "alpha beta gamma delta epsilon"),
            ("B", "one two three four nine"),
        ])
        assert cp_wer(ref, hyp) == pytest.approx(0.1)

    def test_upper_bounded_by_fixed_mapping(self):
        rng = random.Random(5)
        for _ in range(20):
            ref_rows = random_diarized(rng)
            hyp_rows = corrupt(ref_rows, rng)
            ref, hyp = transcript(ref_rows), transcript(hyp_rows)
            score = cp_wer(ref, hyp)
            # identity mapping is one of the candidates, so min <= it
            ref_c = ref.concatenated(DEFAULT_POLICY)
            hyp_c = hyp.concatenated(DEFAULT_POLICY)
            total = sum(len(w) for w in ref_c.values())
            fixed = sum(
                naive_edit_distance(ref_c[s], hyp_c.get(s, [])) for s in ref_c
            ) + sum(len(w) for s, w in hyp_c.items() if s not in ref_c)
            assert score <= fixed / total + 1e-12

    def test_matches_brute_force(self):
        rng = random.Random(11)
        for _ in range(50):
            ref_rows = random_diarized(rng)
            hyp_rows = corrupt(ref_rows, rng)
            got = cp_wer(transcript(ref_rows), transcript(hyp_rows))
            want = brute_force_cp_wer(ref_rows, hyp_rows)
            assert got == pytest.approx(want, abs=1e-12)

    def test_unequal_speaker_counts(self):
        ref = transcript([("A", "alpha beta gamma"), ("B", "delta epsilon")])
        hyp = transcript([("X", "alpha beta gamma delta epsilon")])
        got = cp_wer(ref, hyp)
        want = brute_force_cp_wer(list(ref.utterances), list(hyp.utterances))
        assert got == pytest.approx(want)

    def test_too_many_speakers(self):
        ref = transcript([("A", "one")])
        hyp = transcript([(f"s{i}", "word") for i in range(7)])
        with pytest.raises(TooManySpeakers):
            cp_wer(ref, hyp)

    def test_empty_reference(self):
        with pytest.raises(EmptyReference):
            cp_wer(transcript([("A", "...")]), transcript([("A", "x")]))


# --- sa_sim ------------------------------------------------------------------

def embeddings(d: dict[str, list[list[float]]]) -> SpeakerEmbeddingSet:
    return SpeakerEmbeddingSet(vectors={
        k: np.asarray(v, dtype=float) for k, v in d.items()
    })


class TestSaSim:
    def test_identical_single_vector(self):
        e = embeddings({"A": [[1.0, 0.0]], "B": [[1.0, 0.0]]})
        assert sa_sim(e, e) == pytest.approx(1.0)

    def test_orthogonal_hand_example(self):
        s = 1 / math.sqrt(2)
        ref = embeddings({"r1": [[1.0, 0.0]], "r2": [[0.0, 1.0]]})
        hyp = embeddings({"h1": [[1.0, 0.0]], "h2": [[s, s]]})
        assert sa_sim(ref, hyp) == pytest.approx((1 + s) / 2, abs=1e-6)

    def test_relabel_invariance(self):
        rng = np.random.default_rng(3)
        vecs = rng.normal(size=(2, 3, 8))
        vecs /= np.linalg.norm(vecs, axis=2, keepdims=True)
        ref = embeddings({"a": vecs[0].tolist(), "b": vecs[1].tolist()})
        hyp1 = embeddings({"x": vecs[0].tolist(), "y": vecs[1].tolist()})
        hyp2 = embeddings({"y": vecs[0].tolist(), "x": vecs[1].tolist()})
        assert sa_sim(ref, hyp1) == pytest.approx(sa_sim(ref, hyp2), abs=1e-12)

    def test_centroid_is_normalized_mean(self):
        e = embeddings({"A": [[1.0, 0.0], [0.0, 1.0]]})
        centroid = e.centroid("A")
        assert np.linalg.norm(centroid) == pytest.approx(1.0)

    def test_pairwise_granularity(self):
        ref = embeddings({"A": [[1.0, 0.0], [0.0, 1.0]]})
        hyp = embeddings({"B": [[1.0, 0.0]]})
        # mean of cos with each utterance: (1 + 0) / 2
        assert sa_sim(ref, hyp, granularity="pairwise") == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            sa_sim(
                embeddings({"A": [[1.0, 0.0]]}),
                embeddings({"A": [[1.0, 0.0, 0.0]]}),
            )

    def test_not_unit_norm_rejected(self):
        with pytest.raises(DimensionMismatch):
            embeddings({"A": [[2.0, 0.0]]})


# --- label recall -------------------------------------------------------------

VOCAB = ("A", "B", "C")


class TestLabelRecall:
    def test_all_correct(self):
        pairs = [("A", "A"), ("B", "B"), ("C", "C")]
        assert label_recall(pairs, VOCAB) == 1.0

    def test_macro_mean(self):
        pairs = [("A", "A"), ("A", "A"), ("B", "C"), ("B", "C")]
        assert label_recall(pairs, VOCAB) == pytest.approx(0.5)

    def test_constant_prediction(self):
        pairs = [("A", "A"), ("B", "A"), ("C", "A")]
        assert label_recall(pairs, VOCAB) == pytest.approx(1 / 3)

    def test_micro(self):
        pairs = [("A", "A"), ("A", "A"), ("A", "A"), ("B", "C")]
        assert label_recall(pairs, VOCAB, average="micro") == pytest.approx(0.75)

    def test_order_invariant(self):
        pairs = [("A", "A"), ("B", "C"), ("C", "C")]
        assert label_recall(pairs, VOCAB) == label_recall(list(reversed(pairs)), VOCAB)

    def test_unknown_gold(self):
        with pytest.raises(UnknownGoldLabel):
            label_recall([("Z", "A")], VOCAB)


# --- judge scores ---------------------------------------------------------------

def judge_reply(**overrides) -> str:
    obj = {
        "spontaneity": 4.0, "coherence": 4.0, "intelligibility": 4.0,
        "similarity": 4.0, "quality": 4.0, "instruction_following": 4.0,
    }
    obj.update(overrides)
    return json.dumps(obj)


class TestJudgeScores:
    def test_all_fours(self):
        scores = parse_judge_scores(judge_reply())
        assert scores == JudgeScores(4, 4, 4, 4, 4, 4)

    def test_missing_key(self):
        obj = json.loads(judge_reply())
        del obj["coherence"]
        with pytest.raises(SchemaViolation):
            parse_judge_scores(json.dumps(obj))

    def test_out_of_range(self):
        with pytest.raises(ScoreOutOfRange):
            parse_judge_scores(judge_reply(quality=6))

    def test_not_json(self):
        with pytest.raises(SchemaViolation):
            parse_judge_scores("a thoughtful prose review")


# --- aggregation ------------------------------------------------------------------

class TestAggregateReport:
    def test_single_sample(self):
        sample = SampleMetrics(
            sample_id="s1", wer=0.2, cp_wer=0.3,
            judge=parse_judge_scores(judge_reply()),
        )
        report = aggregate_report([sample])
        assert report.wer == pytest.approx(0.2)
        assert report.judge_mean["quality"] == pytest.approx(4.0)
        assert report.judge_std["quality"] == pytest.approx(0.0)

    def test_population_std(self):
        samples = [
            SampleMetrics(sample_id="a", wer=0.1, judge=parse_judge_scores(judge_reply(quality=3))),
            SampleMetrics(sample_id="b", wer=0.3, judge=parse_judge_scores(judge_reply(quality=5))),
        ]
        report = aggregate_report(samples)
        assert report.wer == pytest.approx(0.2)
        assert report.judge_mean["quality"] == pytest.approx(4.0)
        assert report.judge_std["quality"] == pytest.approx(1.0)

    def test_external_passthrough_requires_all(self):
        samples = [
            SampleMetrics(sample_id="a", wer=0.1, external={"utmos": 3.0, "fvd": 100.0}),
            SampleMetrics(sample_id="b", wer=0.1, external={"utmos": 4.0}),
        ]
        report = aggregate_report(samples)
        assert report.external == {"utmos": 3.5}

    def test_ratings_aggregate(self):
        samples = [
            SampleMetrics(sample_id="a", ratings={"mos_quality": 3.0}),
            SampleMetrics(sample_id="b", ratings={"mos_quality": 5.0}),
        ]
        report = aggregate_report(samples)
        assert report.ratings_mean["mos_quality"] == pytest.approx(4.0)
        assert report.ratings_std["mos_quality"] == pytest.approx(1.0)

    def test_label_recall_in_report(self):
        samples = [
            SampleMetrics(sample_id="a", gold_relationship="Friends",
                          predicted_relationship="Friends",
                          gold_interaction="Banter", predicted_interaction="Conflict"),
            SampleMetrics(sample_id="b", gold_relationship="Family",
                          predicted_relationship="Friends",
                          gold_interaction="Banter", predicted_interaction="Banter"),
        ]
        from dialogcut.annotation import INTERACTION_MODES, RELATIONSHIPS

        report = aggregate_report(
            samples,
            relationship_vocabulary=RELATIONSHIPS,
            interaction_vocabulary=INTERACTION_MODES,
        )
        assert report.label_recall_relationship == pytest.approx(0.5)
        assert report.label_recall_interaction == pytest.approx(0.5)

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            aggregate_report([])

    def test_csv_round(self):
        report = aggregate_report([SampleMetrics(sample_id="a", wer=0.25)])
        csv = report.to_csv()
        header, row = csv.strip().split("\n")
        assert "wer" in header.split(",")
        assert "0.25" in row.split(",")
