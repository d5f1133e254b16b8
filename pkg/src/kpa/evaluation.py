"""Classification metrics, threshold tuning, precision-at-coverage, sampling, agreement.

Threshold searches sweep the midpoints between consecutive distinct scores
plus the extremes; since selection policies depend only on score ordering,
this finite set covers every achievable operating point.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ConfigError, DataError
from .ingest import Comment, Dataset, LabeledPair

JUDGMENT_MATCH = "match"
JUDGMENT_NO_MATCH = "no-match"
JUDGMENT_UNCLEAR = "unclear"
JUDGMENTS = (JUDGMENT_MATCH, JUDGMENT_NO_MATCH, JUDGMENT_UNCLEAR)

DEFAULT_COVERAGE_LEVELS = (0.2, 0.4, 0.6, 0.8, 1.0)

COVER_ALL = float("-inf")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float


def confusion_metrics(tp: int, fp: int, fn: int, tn: int) -> Metrics:
    """Standard accuracy/precision/recall/F1; undefined ratios collapse to 0."""
    if min(tp, fp, fn, tn) < 0:
        raise DataError("confusion counts must be >= 0")
    total = tp + fp + fn + tn
    if total == 0:
        raise DataError("empty confusion table")
    accuracy = (tp + tn) / total
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Metrics(accuracy, precision, recall, f1)


def metrics_from_predictions(predictions: Sequence[bool], labels: Sequence[bool]) -> Metrics:
    if len(predictions) != len(labels):
        raise DataError("predictions not aligned with labels")
    tp = sum(1 for p, l in zip(predictions, labels) if p and l)
    fp = sum(1 for p, l in zip(predictions, labels) if p and not l)
    fn = sum(1 for p, l in zip(predictions, labels) if not p and l)
    tn = sum(1 for p, l in zip(predictions, labels) if not p and not l)
    return confusion_metrics(tp, fp, fn, tn)


def _candidate_thresholds(scores: Iterable[float]) -> list[float]:
    distinct = sorted(set(scores))
    mids = [(a + b) / 2 for a, b in zip(distinct, distinct[1:])]
    return sorted({0.0, 1.0, *mids})


def policy_predictions(
    pairs: Sequence[LabeledPair], policy_kind: str, threshold: Optional[float] = None
) -> list[bool]:
    """Per-pair match predictions under a selection policy.

    BM and BM_TH group the pairs per comment (topic, stance, comment text) and
    mark only the best-scoring key point; argmax ties break by key point text
    ascending.
    """
    for p in pairs:
        if p.score is None:
            raise DataError("all pairs must carry scores")
    if policy_kind == "th":
        if threshold is None:
            raise ConfigError("th policy needs a threshold")
        return [p.score > threshold for p in pairs]
    if policy_kind not in ("bm", "bm+th"):
        raise ConfigError(f"unknown policy kind {policy_kind!r}")
    if policy_kind == "bm+th" and threshold is None:
        raise ConfigError("bm+th policy needs a threshold")
    groups: dict[tuple, list[int]] = {}
    for i, p in enumerate(pairs):
        groups.setdefault((p.topic, p.stance, p.comment_text), []).append(i)
    predictions = [False] * len(pairs)
    for indices in groups.values():
        best = min(indices, key=lambda i: (-pairs[i].score, pairs[i].key_point_text))
        if policy_kind == "bm" or pairs[best].score > threshold:
            predictions[best] = True
    return predictions


def tune_threshold(dev: Sequence[LabeledPair], policy_kind: str) -> tuple[float, float]:
    """Lowest threshold maximizing F1 on the dev pairs, and that F1."""
    if not dev:
        raise DataError("empty dev set")
    if policy_kind not in ("th", "bm+th"):
        raise ConfigError(f"threshold tuning applies to th/bm+th, not {policy_kind!r}")
    labels = [p.label for p in dev]
    best_t, best_f1 = 0.0, -1.0
    for t in _candidate_thresholds(p.score for p in dev):
        f1 = metrics_from_predictions(policy_predictions(dev, policy_kind, t), labels).f1
        if f1 > best_f1:
            best_t, best_f1 = t, f1
    return best_t, best_f1


@dataclass(frozen=True)
class CoverageCurve:
    levels: tuple[float, ...]
    precision_at: tuple[float, ...]
    thresholds_at: tuple[float, ...]


def precision_at_coverage(
    sample: Sequence[tuple[bool, float]],
    levels: Sequence[float] = DEFAULT_COVERAGE_LEVELS,
) -> CoverageCurve:
    """Maximal precision at each minimum-coverage level.

    Coverage of a threshold is the fraction of the sample scoring strictly
    above it (the cover-everything threshold is included); precision is the
    fraction of covered items labeled correct. Among thresholds achieving the
    maximal precision, the lowest (highest-coverage) one is reported.
    """
    if not sample:
        raise DataError("empty sample")
    if list(levels) != sorted(levels) or not all(0.0 < c <= 1.0 for c in levels):
        raise ConfigError("levels must be ascending and lie in (0,1]")
    n = len(sample)
    operating_points: list[tuple[float, float, float]] = []  # (threshold, coverage, precision)
    for t in [COVER_ALL, *_candidate_thresholds(s for _, s in sample)]:
        covered = [label for label, score in sample if score > t]
        if not covered:
            continue
        coverage = len(covered) / n
        precision = sum(covered) / len(covered)
        operating_points.append((t, coverage, precision))
    precision_at: list[float] = []
    thresholds_at: list[float] = []
    for c in levels:
        feasible = [(p, t) for t, cov, p in operating_points if cov >= c]
        if not feasible:
            precision_at.append(0.0)
            thresholds_at.append(COVER_ALL)
            continue
        best_p = max(p for p, _ in feasible)
        best_t = min(t for p, t in feasible if p == best_p)
        precision_at.append(best_p)
        thresholds_at.append(best_t)
    return CoverageCurve(tuple(levels), tuple(precision_at), tuple(thresholds_at))


def sample_uniform(dataset: Dataset, n: int, seed: int) -> list[Comment]:
    """Stratified sample with per-topic quotas differing by at most one.

    The remainder goes to topics chosen by seeded shuffle; topics short of
    their quota contribute everything they have and the deficit is
    redistributed. Deterministic for a fixed seed.
    """
    if n < 1:
        raise ConfigError("sample size must be >= 1")
    if n > len(dataset.comments):
        raise DataError(f"sample size {n} exceeds dataset size {len(dataset.comments)}")
    by_topic: dict[str, list[Comment]] = {}
    for c in dataset.comments:
        by_topic.setdefault(c.topic_id, []).append(c)
    for group in by_topic.values():
        group.sort(key=lambda c: c.id)
    topics = sorted(by_topic)
    rng = random.Random(seed)
    shuffled = topics[:]
    rng.shuffle(shuffled)
    base, rem = divmod(n, len(topics))
    quota = {t: base for t in topics}
    for t in shuffled[:rem]:
        quota[t] += 1
    deficit = 0
    for t in topics:
        available = len(by_topic[t])
        if quota[t] > available:
            deficit += quota[t] - available
            quota[t] = available
    while deficit > 0:
        progressed = False
        for t in shuffled:
            if deficit == 0:
                break
            if quota[t] < len(by_topic[t]):
                quota[t] += 1
                deficit -= 1
                progressed = True
        if not progressed:
            raise DataError("cannot satisfy sample size")
    out: list[Comment] = []
    for t in topics:
        out.extend(rng.sample(by_topic[t], quota[t]))
    return out


def _jsonl_records(path: Path, required: tuple[str, ...]) -> Iterable[tuple[int, dict]]:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            raise DataError(f"{path}:{line_no}: malformed record") from None
        if not isinstance(rec, dict):
            raise DataError(f"{path}:{line_no}: record must be an object")
        missing = [k for k in required if k not in rec]
        if missing:
            raise DataError(f"{path}:{line_no}: missing field(s) {', '.join(missing)}")
        yield line_no, rec


def load_labeled_sample(path: str | Path) -> list[tuple[bool, float]]:
    """Scored, labeled sample records: {comment_id, key_point_id, score, label} per line."""
    path = Path(path)
    sample: list[tuple[bool, float]] = []
    for line_no, rec in _jsonl_records(path, ("comment_id", "key_point_id", "score", "label")):
        label = rec["label"]
        if isinstance(label, bool):
            pass
        elif label in (0, 1):
            label = bool(label)
        else:
            raise DataError(f"{path}:{line_no}: label must be boolean or 0/1")
        score = rec["score"]
        if not isinstance(score, (int, float)) or isinstance(score, bool):
            raise DataError(f"{path}:{line_no}: score must be a number")
        sample.append((label, float(score)))
    if not sample:
        raise DataError(f"{path}: no records")
    return sample


def load_annotations(path: str | Path) -> "AnnotationSet":
    """Annotation records: {comment_id, key_point_id, annotator_id, judgment} per line."""
    path = Path(path)
    out = AnnotationSet()
    for line_no, rec in _jsonl_records(
        path, ("comment_id", "key_point_id", "annotator_id", "judgment")
    ):
        try:
            out.add(rec["comment_id"], rec["key_point_id"], rec["annotator_id"], rec["judgment"])
        except DataError as exc:
            raise DataError(f"{path}:{line_no}: {exc}") from None
    if not len(out):
        raise DataError(f"{path}: no records")
    return out


def majority_label(judgments: Sequence[str]) -> bool:
    """True iff strictly more than half the judgments are "match"."""
    if not judgments:
        raise DataError("no judgments")
    for j in judgments:
        if j not in JUDGMENTS:
            raise DataError(f"unknown judgment {j!r}")
    return sum(1 for j in judgments if j == JUDGMENT_MATCH) * 2 > len(judgments)


def cohen_kappa(a: Sequence[bool], b: Sequence[bool]) -> float:
    if len(a) != len(b):
        raise DataError("label vectors differ in length")
    if not a:
        raise DataError("empty label vectors")
    n = len(a)
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    pa = sum(a) / n
    pb = sum(b) / n
    p_e = pa * pb + (1 - pa) * (1 - pb)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1 - p_e)


def fleiss_kappa(table: Sequence[Sequence[int]]) -> float:
    """Fleiss' kappa over a per-item category-count table (equal ratings per item)."""
    if not table:
        raise DataError("empty table")
    n_ratings = sum(table[0])
    if n_ratings < 2:
        raise DataError("need at least 2 ratings per item")
    for row in table:
        if any(x < 0 for x in row):
            raise DataError("negative count")
        if sum(row) != n_ratings:
            raise DataError("unequal rating counts across items")
    n_items = len(table)
    n_categories = len(table[0])
    p_j = [
        sum(row[j] for row in table) / (n_items * n_ratings) for j in range(n_categories)
    ]
    p_bar_e = sum(p * p for p in p_j)
    p_bar_o = sum(
        (sum(x * x for x in row) - n_ratings) / (n_ratings * (n_ratings - 1)) for row in table
    ) / n_items
    if p_bar_e == 1.0:
        return 1.0
    return (p_bar_o - p_bar_e) / (1 - p_bar_e)


PairKey = tuple[str, str]  # (comment_id, key_point_id)


class AnnotationSet:
    """Crowd judgments per (comment, key point) pair, one per annotator."""

    def __init__(self) -> None:
        self._by_pair: dict[PairKey, dict[str, str]] = {}

    def add(self, comment_id: str, key_point_id: str, annotator_id: str, judgment: str) -> None:
        if judgment not in JUDGMENTS:
            raise DataError(f"unknown judgment {judgment!r}")
        pair = (comment_id, key_point_id)
        per_pair = self._by_pair.setdefault(pair, {})
        if annotator_id in per_pair:
            raise DataError(f"annotator {annotator_id!r} judged pair {pair!r} twice")
        per_pair[annotator_id] = judgment

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, str]]) -> "AnnotationSet":
        out = cls()
        for rec in records:
            out.add(rec["comment_id"], rec["key_point_id"], rec["annotator_id"], rec["judgment"])
        return out

    def pairs(self) -> list[PairKey]:
        return sorted(self._by_pair)

    def judgments(self, pair: PairKey) -> dict[str, str]:
        return dict(self._by_pair[pair])

    def annotators(self) -> list[str]:
        seen: set[str] = set()
        for per_pair in self._by_pair.values():
            seen.update(per_pair)
        return sorted(seen)

    def __len__(self) -> int:
        return len(self._by_pair)

    def to_matrix(self, collapse_unclear: bool = True) -> list[list[int]]:
        """Per-item category counts for Fleiss' kappa.

        Two categories (match / no-match, unclear counted as no-match) by
        default; three with ``collapse_unclear=False``.
        """
        rows = []
        for pair in self.pairs():
            judgments = list(self._by_pair[pair].values())
            match = sum(1 for j in judgments if j == JUDGMENT_MATCH)
            if collapse_unclear:
                rows.append([match, len(judgments) - match])
            else:
                unclear = sum(1 for j in judgments if j == JUDGMENT_UNCLEAR)
                rows.append([match, len(judgments) - match - unclear, unclear])
        return rows


def _is_match(judgment: str) -> bool:
    return judgment == JUDGMENT_MATCH


def annotator_kappa(
    annotations: AnnotationSet, min_shared: int = 50, min_peers: int = 5
) -> dict[str, float]:
    """Mean pairwise Cohen's kappa per sufficiently connected annotator.

    An annotator qualifies with at least ``min_peers`` peers sharing at least
    ``min_shared`` common pairs; the mean runs over those peers only.
    Judgments are binarized (match vs. rest).
    """
    shared: dict[tuple[str, str], list[tuple[bool, bool]]] = {}
    for pair in annotations.pairs():
        per_pair = annotations.judgments(pair)
        names = sorted(per_pair)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                shared.setdefault((a, b), []).append(
                    (_is_match(per_pair[a]), _is_match(per_pair[b]))
                )
    peers: dict[str, list[str]] = {}
    for (a, b), overlaps in shared.items():
        if len(overlaps) >= min_shared:
            peers.setdefault(a, []).append(b)
            peers.setdefault(b, []).append(a)
    out: dict[str, float] = {}
    for annotator, their_peers in peers.items():
        if len(their_peers) < min_peers:
            continue
        kappas = []
        for peer in their_peers:
            key = (annotator, peer) if (annotator, peer) in shared else (peer, annotator)
            overlaps = shared[key]
            first = [x for x, _ in overlaps]
            second = [y for _, y in overlaps]
            if key[0] == annotator:
                kappas.append(cohen_kappa(first, second))
            else:
                kappas.append(cohen_kappa(second, first))
        out[annotator] = sum(kappas) / len(kappas)
    return out


def reliable_annotators(
    annotations: AnnotationSet,
    min_kappa: float = 0.1,
    min_shared: int = 50,
    min_peers: int = 5,
) -> set[str]:
    """Annotators surviving the agreement cutoff.

    Scored annotators below ``min_kappa`` are dropped; annotators too poorly
    connected to score keep their judgments.
    """
    scores = annotator_kappa(annotations, min_shared=min_shared, min_peers=min_peers)
    return {a for a in annotations.annotators() if a not in scores or scores[a] >= min_kappa}


def split_consistency(annotations: AnnotationSet, seed: int, ratings_per_item: int = 14) -> float:
    """Cohen's kappa between majority labels of two random halves of the ratings."""
    rng = random.Random(seed)
    half = ratings_per_item // 2
    first_labels: list[bool] = []
    second_labels: list[bool] = []
    for pair in annotations.pairs():
        per_pair = annotations.judgments(pair)
        if len(per_pair) != ratings_per_item:
            raise DataError(
                f"pair {pair!r} has {len(per_pair)} judgments, expected {ratings_per_item}"
            )
        judgments = [per_pair[a] for a in sorted(per_pair)]
        rng.shuffle(judgments)
        first_labels.append(majority_label(judgments[:half]))
        second_labels.append(majority_label(judgments[half:]))
    if not first_labels:
        raise DataError("no annotated pairs")
    return cohen_kappa(first_labels, second_labels)
