"""Selection policies mapping a comment's per-key-point scores to matched key points.

Three policies: TH matches every key point scoring strictly above the
threshold; BM matches the single best-scoring key point; BM_TH matches the
best key point only when it scores strictly above the threshold. A score
exactly equal to the threshold never matches.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional

from .errors import ConfigError, DataError


class PolicyKind(str, Enum):
    TH = "th"
    BM = "bm"
    BM_TH = "bm+th"


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    threshold: Optional[float] = None

    def __post_init__(self) -> None:
        needs_threshold = self.kind in (PolicyKind.TH, PolicyKind.BM_TH)
        if needs_threshold:
            if self.threshold is None:
                raise ConfigError(f"policy {self.kind.value} requires a threshold")
            if not 0.0 <= self.threshold <= 1.0:
                raise ConfigError(f"threshold {self.threshold} outside [0,1]")
        elif self.threshold is not None:
            raise ConfigError("policy bm takes no threshold")

    @classmethod
    def parse(cls, kind: str, threshold: Optional[float] = None) -> "Policy":
        try:
            parsed = PolicyKind(kind.lower())
        except ValueError:
            raise ConfigError(f"unknown policy {kind!r}") from None
        if parsed is PolicyKind.BM:
            return cls(parsed, None)
        return cls(parsed, threshold)


def best_match(scores: Mapping[str, float]) -> str:
    """Argmax key point id; ties broken by id ascending."""
    if not scores:
        raise DataError("no key points")
    return min(scores, key=lambda k: (-scores[k], k))


def apply_policy(scores: Mapping[str, float], policy: Policy) -> set[str]:
    """Matched key point ids for one comment's score map."""
    if policy.kind is PolicyKind.TH:
        t = policy.threshold
        return {k for k, s in scores.items() if s > t}
    best = best_match(scores)
    if policy.kind is PolicyKind.BM:
        return {best}
    if scores[best] > policy.threshold:
        return {best}
    return set()
