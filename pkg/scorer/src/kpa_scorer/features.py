"""Hand-built features over (comment, key point, topic) triples.

Everything is bounded to [0, 1] so a logistic layer on top stays
well-behaved regardless of input length.
"""

import re

_WORD = re.compile(r"[a-z0-9']+")

MATCH_FEATURES = 4
QUALITY_FEATURES = 3


def word_set(text: str) -> frozenset[str]:
    return frozenset(_WORD.findall(text.lower()))


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 1.0
    union = a | b
    return len(a & b) / len(union)


def match_features(comment: str, key_point: str, topic: str) -> list[float]:
    c = word_set(comment)
    k = word_set(key_point)
    t = word_set(topic)
    containment = len(c & k) / len(k) if k else 0.0
    lengths = (len(c), len(k))
    length_affinity = min(lengths) / max(lengths) if max(lengths) else 1.0
    return [
        _jaccard(c, k),
        containment,
        length_affinity,
        _jaccard(k, t),
    ]


def quality_features(text: str, topic: str) -> list[float]:
    words = word_set(text)
    n = len(_WORD.findall(text.lower()))
    alpha = sum(ch.isalpha() or ch.isspace() for ch in text) / len(text) if text else 0.0
    return [
        1.0 / (1.0 + n / 10.0),
        alpha,
        _jaccard(words, word_set(topic)),
    ]
