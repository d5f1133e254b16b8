"""Key point candidate extraction: concise, high-quality, self-contained sentences.

A comment contributes a candidate only when its analysis text is a single
sentence within the token cap, scores at or above the quality threshold, and
does not open with a pronoun (which would leave the key point context-bound).
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ConfigError
from .ingest import Comment, is_single_sentence, token_count
from .scoring import QualityScorer

# Personal pronouns plus demonstratives; either breaks self-containment.
PRONOUN_BLOCKLIST = frozenset(
    {
        "i", "you", "he", "she", "it", "we", "they", "this", "that", "these",
        "those", "there", "me", "him", "her", "us", "them", "my", "your",
        "his", "its", "our", "their",
    }
)


@dataclass(frozen=True)
class KeyPointCandidate:
    id: str
    source_comment_id: str
    text: str
    token_count: int
    quality: float


@dataclass(frozen=True)
class CandidateConfig:
    """Per-domain candidate gates (token cap 12/10/12, quality 0.7/0.4/0.35)."""

    max_tokens: int = 12
    min_quality: float = 0.7
    pronoun_blocklist: frozenset[str] = PRONOUN_BLOCKLIST

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be >= 1")
        if not 0.0 <= self.min_quality <= 1.0:
            raise ConfigError("min_quality must lie in [0,1]")


def starts_with_pronoun(text: str, blocklist: frozenset[str] = PRONOUN_BLOCKLIST) -> bool:
    words = text.split()
    if not words:
        return False
    first = words[0].strip(string.punctuation).lower()
    return first in blocklist


def candidate_id(source_comment_id: str) -> str:
    return f"kp_{source_comment_id}"


def extract_candidates(
    comments: Sequence[Comment],
    cfg: CandidateConfig,
    quality: QualityScorer,
) -> list[KeyPointCandidate]:
    """Candidates from single-sentence comments passing all three gates.

    Output sorted by quality descending, id ascending on ties.
    """
    out: list[KeyPointCandidate] = []
    for comment in comments:
        text = comment.analysis_text
        if not is_single_sentence(text):
            continue
        n_tokens = token_count(text)
        if n_tokens > cfg.max_tokens:
            continue
        if starts_with_pronoun(text, cfg.pronoun_blocklist):
            continue
        q = quality.quality(text, comment.topic_id)
        if q < cfg.min_quality:
            continue
        out.append(
            KeyPointCandidate(
                id=candidate_id(comment.id),
                source_comment_id=comment.id,
                text=text,
                token_count=n_tokens,
                quality=q,
            )
        )
    out.sort(key=lambda c: (-c.quality, c.id))
    return out
