"""Key point selection: match, rank by coverage, dedup, re-match, re-rank.

Matching assigns each item to its best-scoring candidate when that score
strictly exceeds the threshold. Selection then walks candidates in coverage
order and removes any candidate whose symmetric score against a higher-ranked
one (including already-removed ones) exceeds the threshold; removed candidates
and their matches are re-matched against the survivors, which are finally
re-ranked by total match count.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

from .errors import ConfigError, DataError
from .extraction import KeyPointCandidate
from .ingest import Comment
from .policies import Policy, PolicyKind, apply_policy, best_match
from .scoring import MatchScorer, symmetric_score

COMMENT = "comment"
CANDIDATE = "candidate"


@dataclass(frozen=True)
class MatchItem:
    """A matchable item: an original comment or an absorbed candidate."""

    id: str
    text: str
    kind: str = COMMENT


@dataclass(frozen=True)
class Match:
    item: MatchItem
    score: float


MatchMap = dict[str, list[Match]]


@dataclass(frozen=True)
class KeyPointResult:
    """A selected key point with its ranked matches.

    ``match_count`` counts all matched items (absorbed candidates included,
    as ranked by the selection algorithm); ``prevalence`` is the fraction of
    original comments matched, which is what analysis reports quote.
    """

    key_point: KeyPointCandidate
    matched: tuple[Match, ...]
    comment_total: int

    @property
    def match_count(self) -> int:
        return len(self.matched)

    @property
    def comment_count(self) -> int:
        return sum(1 for m in self.matched if m.item.kind == COMMENT)

    @property
    def prevalence(self) -> float:
        if self.comment_total == 0:
            return 0.0
        return self.comment_count / self.comment_total


def as_items(comments: Sequence[Union[Comment, MatchItem]]) -> list[MatchItem]:
    out = []
    for c in comments:
        if isinstance(c, MatchItem):
            out.append(c)
        else:
            out.append(MatchItem(id=c.id, text=c.analysis_text, kind=COMMENT))
    return out


def _sorted_matches(matches: Sequence[Match]) -> tuple[Match, ...]:
    return tuple(sorted(matches, key=lambda m: (-m.score, m.item.id)))


def get_matches(
    items: Sequence[Union[Comment, MatchItem]],
    candidates: Sequence[KeyPointCandidate],
    t: float,
    scorer: MatchScorer,
    topic: str,
) -> MatchMap:
    """Assign each item to its best candidate iff that score exceeds ``t``.

    Candidates with no matches have no entry. Argmax ties break by candidate
    id ascending.
    """
    if not candidates:
        raise DataError("empty candidate list")
    if not 0.0 <= t <= 1.0:
        raise ConfigError(f"threshold {t} outside [0,1]")
    by_id = {c.id: c for c in candidates}
    k_to_c: MatchMap = {}
    for item in as_items(items):
        scores = {cid: scorer.score(item.text, cand.text, topic) for cid, cand in by_id.items()}
        best = best_match(scores)
        if scores[best] > t:
            k_to_c.setdefault(best, []).append(Match(item, scores[best]))
    return k_to_c


def select_key_points(
    comments: Sequence[Union[Comment, MatchItem]],
    candidates: Sequence[KeyPointCandidate],
    t: float,
    scorer: MatchScorer,
    topic: str,
    rematch_t: Optional[float] = None,
) -> list[KeyPointResult]:
    """Produce the ranked key point list for one topic(+stance) group.

    ``rematch_t`` overrides the threshold used when re-matching removed
    candidates and their items against the survivors; by default the same
    ``t`` governs every stage.
    """
    if not candidates:
        return []
    items = as_items(comments)
    n_comments = sum(1 for it in items if it.kind == COMMENT)
    k_to_c = get_matches(items, candidates, t, scorer, topic)
    if not k_to_c:
        return []
    by_id = {c.id: c for c in candidates}
    # Rank order is fixed up front; removals below do not shrink the list the
    # traversal compares against.
    ranked = sorted(k_to_c, key=lambda kid: (-len(k_to_c[kid]), kid))
    surviving: MatchMap = {kid: list(matches) for kid, matches in k_to_c.items()}
    pool: list[MatchItem] = []
    for idx, k1 in enumerate(ranked):
        for k2 in ranked[:idx]:
            s = symmetric_score(scorer, by_id[k1].text, by_id[k2].text, topic)
            if s > t:
                pool.append(MatchItem(id=k1, text=by_id[k1].text, kind=CANDIDATE))
                pool.extend(m.item for m in surviving[k1])
                del surviving[k1]
                break
    survivors = [by_id[kid] for kid in surviving]
    if pool:
        rematches = get_matches(
            pool, survivors, t if rematch_t is None else rematch_t, scorer, topic
        )
        for kid, matches in rematches.items():
            surviving[kid].extend(matches)
    final_order = sorted(surviving, key=lambda kid: (-len(surviving[kid]), kid))
    return [
        KeyPointResult(
            key_point=by_id[kid],
            matched=_sorted_matches(surviving[kid]),
            comment_total=n_comments,
        )
        for kid in final_order
    ]


def truncate_key_points(
    results: Sequence[KeyPointResult], max_kps: int
) -> list[KeyPointResult]:
    if max_kps < 1:
        raise ConfigError("max_kps must be >= 1")
    return list(results[:max_kps])


@dataclass(frozen=True)
class FinalMatch:
    """Outcome of matching all comments against the final key point list."""

    results: tuple[KeyPointResult, ...]
    assignments: dict[str, Optional[tuple[str, float]]]
    unmatched: tuple[str, ...]


def final_match(
    comments: Sequence[Comment],
    key_points: Sequence[KeyPointResult],
    policy: Policy,
    scorer: MatchScorer,
    topic: str,
) -> FinalMatch:
    """Re-match every comment against the final key points under ``policy``.

    BM assigns every comment; BM_TH leaves low-scoring comments unmatched.
    Absorbed candidate items from the selection stage stay attached to their
    key point (they are not comments and are not re-matched here).
    """
    if not key_points:
        raise DataError("empty key point list")
    if policy.kind is PolicyKind.TH:
        raise ConfigError("final matching requires a single-assignment policy (bm or bm+th)")
    assignments: dict[str, Optional[tuple[str, float]]] = {}
    per_kp: dict[str, list[Match]] = {
        kp.key_point.id: [m for m in kp.matched if m.item.kind == CANDIDATE]
        for kp in key_points
    }
    unmatched: list[str] = []
    for comment in comments:
        scores = {
            kp.key_point.id: scorer.score(comment.analysis_text, kp.key_point.text, topic)
            for kp in key_points
        }
        chosen = apply_policy(scores, policy)
        if chosen:
            kp_id = next(iter(chosen))
            assignments[comment.id] = (kp_id, scores[kp_id])
            per_kp[kp_id].append(
                Match(MatchItem(comment.id, comment.analysis_text, COMMENT), scores[kp_id])
            )
        else:
            assignments[comment.id] = None
            unmatched.append(comment.id)
    n_comments = len(comments)
    results = tuple(
        replace(
            kp,
            matched=_sorted_matches(per_kp[kp.key_point.id]),
            comment_total=n_comments,
        )
        for kp in key_points
    )
    return FinalMatch(results=results, assignments=assignments, unmatched=tuple(unmatched))
