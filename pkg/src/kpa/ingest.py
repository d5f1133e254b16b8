"""Dataset loading, comment normalization and corpus-level filtering.

Comments arrive as line-delimited JSON records (``id``, ``topic``, optional
``stance``, ``text``, optional ``quality``). Survey comments are reduced to
their first sentence before any analysis; all other domains analyze the raw
text. Filtering removes non-ascii comments, very short ones, ones outside the
token bounds, and optionally the lowest-quality fraction of the survivors.
"""

from __future__ import annotations

import csv
import json
import string
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import ConfigError, DataError

STANCES = ("pro", "con")

# Abbreviations that end with a period but do not terminate a sentence.
ABBREVIATIONS = {
    "e.g.", "i.e.", "etc.", "cf.", "vs.", "dr.", "mr.", "mrs.", "ms.",
    "prof.", "sr.", "jr.", "st.", "no.", "fig.", "inc.", "dept.", "approx.",
}

_SENTENCE_ENDERS = ".!?"
_PUNCT = set(string.punctuation)


@dataclass(frozen=True)
class Comment:
    """One input utterance, normalized for analysis."""

    id: str
    topic_id: str
    raw_text: str
    analysis_text: str
    stance: Optional[str] = None
    quality: Optional[float] = None

    def __post_init__(self) -> None:
        if self.stance is not None and self.stance not in STANCES:
            raise DataError(f"comment {self.id}: invalid stance {self.stance!r}")
        if self.quality is not None and not 0.0 <= self.quality <= 1.0:
            raise DataError(f"comment {self.id}: quality {self.quality} outside [0,1]")


@dataclass(frozen=True)
class Dataset:
    name: str
    domain: str
    topics: tuple[str, ...]
    comments: tuple[Comment, ...]

    def __post_init__(self) -> None:
        if self.domain not in ("arguments", "survey", "reviews"):
            raise DataError(f"unknown domain {self.domain!r}")
        known = set(self.topics)
        for c in self.comments:
            if c.topic_id not in known:
                raise DataError(f"comment {c.id}: topic {c.topic_id!r} not in dataset topics")
            if self.domain == "arguments" and c.stance not in STANCES:
                raise DataError(f"comment {c.id}: arguments domain requires a pro/con stance")


@dataclass(frozen=True)
class FilterConfig:
    """Corpus-level filter knobs; defaults follow the per-domain profiles."""

    min_chars: int = 10
    min_tokens: int = 4
    max_tokens: int = 30
    ascii_only: bool = True
    first_sentence_only: bool = False
    low_quality_fraction: float = 0.0
    low_quality_per_topic: bool = False

    def __post_init__(self) -> None:
        if self.min_tokens > self.max_tokens:
            raise ConfigError("min_tokens must be <= max_tokens")
        if self.min_chars < 1:
            raise ConfigError("min_chars must be >= 1")
        if not 0.0 <= self.low_quality_fraction < 1.0:
            raise ConfigError("low_quality_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class LabeledPair:
    """A (comment, key point) pair with a binary match label."""

    comment_text: str
    key_point_text: str
    topic: str
    stance: Optional[str]
    label: bool
    score: Optional[float] = None

    def __post_init__(self) -> None:
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise DataError(f"pair score {self.score} outside [0,1]")


def tokens(text: str) -> list[str]:
    """Whitespace tokens with leading/trailing punctuation stripped; pure-punctuation tokens dropped."""
    out = []
    for raw in text.split():
        tok = raw.strip(string.punctuation)
        if tok:
            out.append(tok)
    return out


def token_count(text: str) -> int:
    return len(tokens(text))


def first_sentence(text: str) -> str:
    """Return the first sentence of ``text``.

    A sentence boundary is ``.``, ``!`` or ``?`` followed by whitespace or
    end-of-string, unless the word it closes is a known abbreviation. Runs of
    terminal punctuation ("?!", "...") are kept with the sentence. Returns the
    whole text when no boundary is found.
    """
    if not text.strip():
        raise DataError("empty comment")
    i = 0
    n = len(text)
    while i < n:
        if text[i] in _SENTENCE_ENDERS:
            j = i
            while j + 1 < n and text[j + 1] in _SENTENCE_ENDERS:
                j += 1
            if j + 1 >= n or text[j + 1].isspace():
                last_word = text[: j + 1].split()[-1].lower()
                if last_word in ABBREVIATIONS:
                    i = j + 1
                    continue
                return text[: j + 1]
            i = j + 1
        else:
            i += 1
    return text


def is_single_sentence(text: str) -> bool:
    if not text.strip():
        return False
    return first_sentence(text) == text.rstrip()


def passes_rules(comment: Comment, cfg: FilterConfig) -> bool:
    """Per-comment rule filters (everything except the low-quality cut)."""
    if cfg.ascii_only and not comment.raw_text.isascii():
        return False
    if len(comment.analysis_text) < cfg.min_chars:
        return False
    n_tokens = token_count(comment.analysis_text)
    if n_tokens < cfg.min_tokens or n_tokens > cfg.max_tokens:
        return False
    return True


def filter_comments(
    comments: Sequence[Comment],
    cfg: FilterConfig,
    quality_scorer=None,
) -> list[Comment]:
    """Apply the rule filters, then drop the lowest-quality fraction of survivors.

    The fraction removes ``floor(f * n)`` comments over the whole survivor set
    (or per topic when ``low_quality_per_topic`` is set), ties broken by id
    ascending. Survivor order is preserved.
    """
    survivors = [c for c in comments if passes_rules(c, cfg)]
    f = cfg.low_quality_fraction
    if f == 0.0:
        return survivors
    if quality_scorer is None:
        raise ConfigError("low_quality_fraction > 0 requires a quality scorer")

    def scored(c: Comment) -> float:
        return quality_scorer.quality(c.analysis_text, c.topic_id)

    removed: set[str] = set()
    if cfg.low_quality_per_topic:
        groups: dict[str, list[Comment]] = {}
        for c in survivors:
            groups.setdefault(c.topic_id, []).append(c)
        for group in groups.values():
            k = int(f * len(group))
            worst = sorted(group, key=lambda c: (scored(c), c.id))[:k]
            removed.update(c.id for c in worst)
    else:
        k = int(f * len(survivors))
        worst = sorted(survivors, key=lambda c: (scored(c), c.id))[:k]
        removed.update(c.id for c in worst)
    return [c for c in survivors if c.id not in removed]


def _comment_from_record(rec: dict, domain: str, line_no: int) -> Comment:
    try:
        cid = rec["id"]
        topic = rec["topic"]
        text = rec["text"]
    except KeyError as exc:
        raise DataError(f"missing field {exc.args[0]!r} at line {line_no}") from None
    if not isinstance(text, str) or not text.strip():
        raise DataError(f"empty text at line {line_no}")
    analysis = first_sentence(text) if domain == "survey" else text
    try:
        return Comment(
            id=str(cid),
            topic_id=str(topic),
            raw_text=text,
            analysis_text=analysis,
            stance=rec.get("stance"),
            quality=rec.get("quality"),
        )
    except DataError as exc:
        raise DataError(f"{exc} (line {line_no})") from None


def load_dataset(path: str | Path, domain: str, name: Optional[str] = None) -> Dataset:
    """Load a line-delimited JSON comment file into a Dataset."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"comments file not found: {path}")
    comments: list[Comment] = []
    seen: set[str] = set()
    topics: list[str] = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed record at line {line_no}: {exc.msg}") from None
            comment = _comment_from_record(rec, domain, line_no)
            if comment.id in seen:
                raise DataError(f"duplicate id {comment.id!r} at line {line_no}")
            seen.add(comment.id)
            if comment.topic_id not in topics:
                topics.append(comment.topic_id)
            comments.append(comment)
    return Dataset(
        name=name or path.stem,
        domain=domain,
        topics=tuple(topics),
        comments=tuple(comments),
    )


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Serialize back to the comment-record format (inverse of load_dataset)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for c in dataset.comments:
            rec: dict = {"id": c.id, "topic": c.topic_id, "text": c.raw_text}
            if c.stance is not None:
                rec["stance"] = c.stance
            if c.quality is not None:
                rec["quality"] = c.quality
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_labeled_pairs(path: str | Path) -> list[LabeledPair]:
    """Load labeled (comment, key point) pairs from a delimited file.

    Columns: topic, stance, comment_text, key_point_text, label (header row,
    label in {1, 0}). The returned list is grouped by topic in order of first
    appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"labeled-pair file not found: {path}")
    pairs: list[LabeledPair] = []
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        required = {"topic", "stance", "comment_text", "key_point_text", "label"}
        missing = required - set(reader.fieldnames)
        if missing:
            raise DataError(f"labeled-pair file missing columns: {sorted(missing)}")
        for row_no, row in enumerate(reader, start=2):
            label = row["label"].strip()
            if label not in ("0", "1"):
                raise DataError(f"invalid label {label!r} at line {row_no}")
            stance = row["stance"].strip() or None
            pairs.append(
                LabeledPair(
                    comment_text=row["comment_text"],
                    key_point_text=row["key_point_text"],
                    topic=row["topic"],
                    stance=stance,
                    label=label == "1",
                )
            )
    order: dict[str, int] = {}
    for p in pairs:
        order.setdefault(p.topic, len(order))
    pairs.sort(key=lambda p: order[p.topic])
    return pairs


def group_by_topic(pairs: Iterable[LabeledPair]) -> dict[str, list[LabeledPair]]:
    groups: dict[str, list[LabeledPair]] = {}
    for p in pairs:
        groups.setdefault(p.topic, []).append(p)
    return groups


def with_scores(pairs: Sequence[LabeledPair], scores: Sequence[float]) -> list[LabeledPair]:
    if len(pairs) != len(scores):
        raise DataError("scores not aligned with pairs")
    return [replace(p, score=s) for p, s in zip(pairs, scores)]
