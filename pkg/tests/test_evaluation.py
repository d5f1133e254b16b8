import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kpa.errors import ConfigError, DataError
from kpa.evaluation import (
    COVER_ALL,
    AnnotationSet,
    annotator_kappa,
    cohen_kappa,
    confusion_metrics,
    fleiss_kappa,
    load_annotations,
    load_labeled_sample,
    majority_label,
    metrics_from_predictions,
    policy_predictions,
    precision_at_coverage,
    reliable_annotators,
    sample_uniform,
    split_consistency,
    tune_threshold,
)
from kpa.ingest import Comment, Dataset, LabeledPair


def pair(comment, kp, score, label, topic="t", stance=None):
    return LabeledPair(comment, kp, topic, stance, label, score=score)


class TestConfusionMetrics:
    def test_reference_values(self):
        m = confusion_metrics(tp=3, fp=1, fn=0, tn=1)
        assert m.accuracy == pytest.approx(0.8)
        assert m.precision == pytest.approx(0.75)
        assert m.recall == pytest.approx(1.0)
        assert m.f1 == pytest.approx(0.857142857, abs=1e-9)

    def test_undefined_ratios_zero(self):
        m = confusion_metrics(tp=0, fp=0, fn=0, tn=4)
        assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)
        assert m.accuracy == 1.0

    def test_negative_rejected(self):
        with pytest.raises(DataError):
            confusion_metrics(-1, 0, 0, 0)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            confusion_metrics(0, 0, 0, 0)

    def test_from_predictions(self):
        m = metrics_from_predictions([True, True, False], [True, False, False])
        assert m == confusion_metrics(tp=1, fp=1, fn=0, tn=1)


class TestPolicyPredictions:
    def test_th(self):
        pairs = [pair("c", "k1", 0.9, True), pair("c", "k2", 0.5, False)]
        assert policy_predictions(pairs, "th", 0.5) == [True, False]

    def test_bm_one_per_comment(self):
        pairs = [
            pair("c1", "k1", 0.9, True),
            pair("c1", "k2", 0.8, False),
            pair("c2", "k1", 0.2, False),
            pair("c2", "k2", 0.3, True),
        ]
        assert policy_predictions(pairs, "bm") == [True, False, False, True]

    def test_bm_tie_by_key_point_text(self):
        pairs = [pair("c", "kb", 0.7, False), pair("c", "ka", 0.7, True)]
        assert policy_predictions(pairs, "bm") == [False, True]

    def test_bm_th_gates_best(self):
        pairs = [pair("c", "k1", 0.4, True), pair("c", "k2", 0.3, False)]
        assert policy_predictions(pairs, "bm+th", 0.5) == [False, False]
        assert policy_predictions(pairs, "bm+th", 0.3) == [True, False]

    def test_groups_split_by_topic_and_stance(self):
        pairs = [
            pair("c", "k1", 0.9, True, topic="t1"),
            pair("c", "k1", 0.8, True, topic="t2"),
            pair("c", "k1", 0.7, True, topic="t2", stance="pro"),
        ]
        assert policy_predictions(pairs, "bm") == [True, True, True]

    def test_requires_scores(self):
        with pytest.raises(DataError, match="scores"):
            policy_predictions([LabeledPair("c", "k", "t", None, True)], "bm")

    def test_th_requires_threshold(self):
        with pytest.raises(ConfigError):
            policy_predictions([pair("c", "k", 0.5, True)], "th")

    def test_unknown_policy(self):
        with pytest.raises(ConfigError):
            policy_predictions([pair("c", "k", 0.5, True)], "argmax")


class TestTuneThreshold:
    def test_reference_sweep(self):
        dev = [
            pair("c1", "k", 0.9, True),
            pair("c2", "k", 0.7, False),
            pair("c3", "k", 0.6, True),
            pair("c4", "k", 0.3, False),
        ]
        t, f1 = tune_threshold(dev, "th")
        assert t == pytest.approx(0.45)
        assert f1 == pytest.approx(0.8)

    def test_all_positive(self):
        dev = [pair("c1", "k", 0.9, True), pair("c2", "k", 0.3, True)]
        t, f1 = tune_threshold(dev, "th")
        assert (t, f1) == (0.0, 1.0)

    def test_all_negative(self):
        dev = [pair("c1", "k", 0.9, False), pair("c2", "k", 0.3, False)]
        t, f1 = tune_threshold(dev, "th")
        assert (t, f1) == (0.0, 0.0)

    def test_empty_dev(self):
        with pytest.raises(DataError):
            tune_threshold([], "th")

    def test_bm_not_tunable(self):
        with pytest.raises(ConfigError):
            tune_threshold([pair("c", "k", 0.5, True)], "bm")

    def test_lowest_maximizer_wins(self):
        dev = [pair("c1", "k", 0.9, True), pair("c2", "k", 0.1, False)]
        t, f1 = tune_threshold(dev, "th")
        assert f1 == 1.0
        assert t == pytest.approx(0.5)


CURVE_SAMPLE = [(True, 0.9), (True, 0.8), (False, 0.7), (True, 0.6), (False, 0.5)]


class TestPrecisionAtCoverage:
    def test_reference_curve(self):
        curve = precision_at_coverage(CURVE_SAMPLE)
        assert curve.levels == (0.2, 0.4, 0.6, 0.8, 1.0)
        assert curve.precision_at == pytest.approx((1.0, 1.0, 0.75, 0.75, 0.6))

    def test_full_coverage_uses_cover_all(self):
        curve = precision_at_coverage(CURVE_SAMPLE)
        assert curve.thresholds_at[-1] == COVER_ALL

    def test_threshold_is_lowest_maximizer(self):
        curve = precision_at_coverage(CURVE_SAMPLE)
        assert curve.thresholds_at[0] == pytest.approx(0.75)

    def test_nonincreasing_on_random_samples(self):
        rng = random.Random(99)
        for _ in range(200):
            n = rng.randint(1, 40)
            sample = [(rng.random() < 0.5, rng.randrange(0, 11) / 10) for _ in range(n)]
            curve = precision_at_coverage(sample)
            for a, b in zip(curve.precision_at, curve.precision_at[1:]):
                assert a >= b

    def test_empty_sample(self):
        with pytest.raises(DataError):
            precision_at_coverage([])

    def test_bad_levels(self):
        with pytest.raises(ConfigError):
            precision_at_coverage(CURVE_SAMPLE, levels=[0.4, 0.2])
        with pytest.raises(ConfigError):
            precision_at_coverage(CURVE_SAMPLE, levels=[0.0, 0.5])


class TestCohenKappa:
    def test_reference_value(self):
        a = [True] * 4 + [False] * 4 + [True, False]
        b = [True] * 4 + [False] * 4 + [False, True]
        assert cohen_kappa(a, b) == pytest.approx(0.6)

    def test_perfect(self):
        assert cohen_kappa([True, False, True], [True, False, True]) == 1.0

    def test_complementary(self):
        assert cohen_kappa([True, False], [False, True]) == pytest.approx(-1.0)

    def test_degenerate_agreement(self):
        assert cohen_kappa([True, True], [True, True]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            cohen_kappa([True], [True, False])


class TestFleissKappa:
    def test_unanimous(self):
        assert fleiss_kappa([[2, 0], [0, 2]]) == pytest.approx(1.0)

    def test_perfect_disagreement(self):
        assert fleiss_kappa([[1, 1], [1, 1]]) == pytest.approx(-1.0)

    def test_single_category(self):
        assert fleiss_kappa([[2, 0], [2, 0]]) == 1.0

    def test_unequal_rows_rejected(self):
        with pytest.raises(DataError):
            fleiss_kappa([[2, 0], [2, 1]])

    def test_needs_two_ratings(self):
        with pytest.raises(DataError):
            fleiss_kappa([[1, 0]])

    def test_bounded_random(self):
        rng = random.Random(7)
        for _ in range(100):
            n_items = rng.randint(1, 12)
            n_ratings = rng.randint(2, 8)
            table = []
            for _ in range(n_items):
                k = rng.randint(0, n_ratings)
                table.append([k, n_ratings - k])
            value = fleiss_kappa(table)
            assert -1.0 <= value <= 1.0 + 1e-12


class TestMajorityLabel:
    def test_strict_majority(self):
        assert majority_label(["match"] * 8 + ["no-match"] * 6) is True
        assert majority_label(["match"] * 7 + ["no-match"] * 7) is False

    def test_unclear_counts_against(self):
        assert majority_label(["match", "unclear", "unclear"]) is False
        assert majority_label(["match", "match", "unclear"]) is True

    def test_unknown_judgment(self):
        with pytest.raises(DataError):
            majority_label(["yes"])


def build_annotations(blocks):
    """blocks: [(annotators, n_pairs, judge_fn(annotator, i) -> judgment)]"""
    annset = AnnotationSet()
    pair_no = 0
    for annotators, n_pairs, judge in blocks:
        for i in range(n_pairs):
            pair_no += 1
            for a in annotators:
                annset.add(f"c{pair_no}", "kp", a, judge(a, i))
    return annset


def agree(a, i):
    return "match" if i % 2 == 0 else "no-match"


def anti_agree(a, i):
    """a3 judges the exact complement of the agree pattern."""
    base = i % 2 == 0
    if a == "a3":
        base = not base
    return "match" if base else "no-match"


class TestAnnotationSet:
    def test_duplicate_rejected(self):
        annset = AnnotationSet()
        annset.add("c1", "k1", "a1", "match")
        with pytest.raises(DataError, match="twice"):
            annset.add("c1", "k1", "a1", "no-match")

    def test_unknown_judgment(self):
        with pytest.raises(DataError, match="judgment"):
            AnnotationSet().add("c1", "k1", "a1", "maybe")

    def test_matrix_collapses_unclear(self):
        annset = AnnotationSet()
        for a, j in [("a1", "match"), ("a2", "unclear"), ("a3", "no-match")]:
            annset.add("c1", "k1", a, j)
        assert annset.to_matrix() == [[1, 2]]
        assert annset.to_matrix(collapse_unclear=False) == [[1, 1, 1]]

    def test_pairs_sorted(self):
        annset = AnnotationSet()
        annset.add("c2", "k1", "a1", "match")
        annset.add("c1", "k2", "a1", "match")
        annset.add("c1", "k1", "a1", "match")
        assert annset.pairs() == [("c1", "k1"), ("c1", "k2"), ("c2", "k1")]


class TestAnnotatorKappa:
    def test_identical_annotators_score_one(self):
        annset = build_annotations([(("a1", "a2"), 60, agree)])
        scores = annotator_kappa(annset, min_shared=50, min_peers=1)
        assert scores == {"a1": pytest.approx(1.0), "a2": pytest.approx(1.0)}

    def test_insufficient_overlap_unscored(self):
        annset = build_annotations([(("a1", "a2"), 10, agree)])
        assert annotator_kappa(annset, min_shared=50, min_peers=1) == {}

    def test_min_peers_excludes_underconnected(self):
        annset = build_annotations([(("a1", "a2"), 60, agree)])
        assert annotator_kappa(annset, min_shared=50, min_peers=5) == {}

    def test_reliable_annotators_cutoff(self):
        annset = build_annotations(
            [
                (("a1", "a2"), 60, agree),
                (("a2", "a3"), 60, anti_agree),
            ]
        )
        scores = annotator_kappa(annset, min_shared=50, min_peers=1)
        assert scores["a1"] == pytest.approx(1.0)
        assert scores["a2"] == pytest.approx(0.0)
        assert scores["a3"] == pytest.approx(-1.0)
        kept = reliable_annotators(annset, min_kappa=0.1, min_shared=50, min_peers=1)
        assert kept == {"a1"}

    def test_unscored_annotators_kept(self):
        annset = build_annotations([(("a1", "a2"), 10, agree)])
        kept = reliable_annotators(annset, min_shared=50, min_peers=1)
        assert kept == {"a1", "a2"}


class TestSplitConsistency:
    def test_identical_judgments(self):
        annset = build_annotations([(tuple(f"a{i}" for i in range(4)), 6, agree)])
        assert split_consistency(annset, seed=0, ratings_per_item=4) == 1.0

    def test_deterministic_per_seed(self):
        rng = random.Random(3)

        def noisy(a, i):
            return "match" if rng.random() < 0.5 else "no-match"

        annset = build_annotations([(tuple(f"a{i}" for i in range(6)), 12, noisy)])
        first = split_consistency(annset, seed=42, ratings_per_item=6)
        second = split_consistency(annset, seed=42, ratings_per_item=6)
        assert first == second

    def test_ragged_counts_rejected(self):
        annset = AnnotationSet()
        annset.add("c1", "k1", "a1", "match")
        annset.add("c1", "k1", "a2", "match")
        annset.add("c2", "k1", "a1", "match")
        with pytest.raises(DataError, match="expected 2"):
            split_consistency(annset, seed=0, ratings_per_item=2)


class TestSampleUniform:
    def make_dataset(self, sizes):
        comments = []
        for t, size in sizes.items():
            for i in range(size):
                comments.append(
                    Comment(
                        id=f"{t}_c{i:03d}", topic_id=t,
                        raw_text=f"Comment {i} on {t}.", analysis_text=f"Comment {i} on {t}.",
                    )
                )
        return Dataset("d", "survey", tuple(sizes), tuple(comments))

    def test_quotas_within_one(self):
        ds = self.make_dataset({"t1": 20, "t2": 20, "t3": 20})
        out = sample_uniform(ds, 10, seed=1)
        counts = {}
        for c in out:
            counts[c.topic_id] = counts.get(c.topic_id, 0) + 1
        assert sum(counts.values()) == 10
        assert max(counts.values()) - min(counts.values()) <= 1

    def test_deterministic(self):
        ds = self.make_dataset({"t1": 20, "t2": 20})
        a = sample_uniform(ds, 8, seed=5)
        b = sample_uniform(ds, 8, seed=5)
        assert [c.id for c in a] == [c.id for c in b]

    def test_deficit_redistributed(self):
        ds = self.make_dataset({"t1": 2, "t2": 30})
        out = sample_uniform(ds, 20, seed=0)
        counts = {}
        for c in out:
            counts[c.topic_id] = counts.get(c.topic_id, 0) + 1
        assert counts["t1"] == 2
        assert counts["t2"] == 18

    def test_too_large(self):
        ds = self.make_dataset({"t1": 3})
        with pytest.raises(DataError):
            sample_uniform(ds, 4, seed=0)

    def test_no_duplicates(self):
        ds = self.make_dataset({"t1": 10, "t2": 10})
        out = sample_uniform(ds, 15, seed=2)
        ids = [c.id for c in out]
        assert len(set(ids)) == len(ids)


class TestLoaders:
    def test_labeled_sample(self, tmp_path):
        path = tmp_path / "sample.jsonl"
        records = [
            {"comment_id": "c1", "key_point_id": "k1", "score": 0.9, "label": True},
            {"comment_id": "c2", "key_point_id": "k1", "score": 0.4, "label": 0},
        ]
        path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
        assert load_labeled_sample(path) == [(True, 0.9), (False, 0.4)]

    def test_labeled_sample_missing_field(self, tmp_path):
        path = tmp_path / "sample.jsonl"
        path.write_text('{"comment_id": "c1", "score": 0.9, "label": 1}\n')
        with pytest.raises(DataError, match="key_point_id"):
            load_labeled_sample(path)

    def test_labeled_sample_bad_label(self, tmp_path):
        path = tmp_path / "sample.jsonl"
        path.write_text('{"comment_id": "c", "key_point_id": "k", "score": 0.9, "label": "yes"}\n')
        with pytest.raises(DataError, match="label"):
            load_labeled_sample(path)

    def test_annotations_round_trip(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        records = [
            {"comment_id": "c1", "key_point_id": "k1", "annotator_id": "a1", "judgment": "match"},
            {"comment_id": "c1", "key_point_id": "k1", "annotator_id": "a2", "judgment": "unclear"},
        ]
        path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
        annset = load_annotations(path)
        assert annset.judgments(("c1", "k1")) == {"a1": "match", "a2": "unclear"}

    def test_annotations_error_has_line(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        path.write_text(
            '{"comment_id": "c1", "key_point_id": "k1", "annotator_id": "a1", "judgment": "match"}\n'
            '{"comment_id": "c1", "key_point_id": "k1", "annotator_id": "a1", "judgment": "match"}\n'
        )
        with pytest.raises(DataError, match=":2:"):
            load_annotations(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(DataError, match="no records"):
            load_labeled_sample(path)


@given(
    st.lists(
        st.tuples(st.booleans(), st.floats(min_value=0.0, max_value=1.0, allow_nan=False)),
        min_size=1,
        max_size=30,
    )
)
def test_curve_nonincreasing_property(sample):
    curve = precision_at_coverage(sample)
    for a, b in zip(curve.precision_at, curve.precision_at[1:]):
        assert a >= b
    for p in curve.precision_at:
        assert 0.0 <= p <= 1.0


@given(st.lists(st.booleans(), min_size=1, max_size=40))
def test_cohen_kappa_self_agreement(labels):
    assert cohen_kappa(labels, labels) == 1.0
