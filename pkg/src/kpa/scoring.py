"""Match/quality scorer interfaces, deterministic test scorers, remote client, caching.

A match scorer maps (comment text, key point text, topic) to a score in [0,1];
a quality scorer maps (text, topic) to [0,1]. Both must be deterministic within
a run and safe to call concurrently.
"""

from __future__ import annotations

import json
import time
from pathlib import Path
from threading import Lock
from typing import Optional, Protocol, Sequence

import httpx

from .errors import ConfigError, DataError, ProtocolError, ScorerError, TransportError
from .ingest import tokens

Pair = tuple[str, str, str]  # (comment side, key point side, topic)


class MatchScorer(Protocol):
    def score(self, a: str, b: str, topic: str) -> float:
        """Match score for comment text ``a`` against key point text ``b``."""
        ...


class QualityScorer(Protocol):
    def quality(self, text: str, topic: str) -> float:
        ...


def _check_range(value: float, context: str) -> float:
    if not 0.0 <= value <= 1.0:
        raise ProtocolError(f"{context}: score {value} outside [0,1]")
    return value


def score_pairs(scorer: MatchScorer, pairs: Sequence[Pair]) -> list[float]:
    """Score a batch; positionally aligned, identical to per-pair calls."""
    out: list[float] = []
    for i, (a, b, topic) in enumerate(pairs):
        try:
            out.append(scorer.score(a, b, topic))
        except ScorerError as exc:
            raise type(exc)(f"pair {i}: {exc}") from exc
    return out


def symmetric_score(scorer: MatchScorer, a: str, b: str, topic: str) -> float:
    """Average of the two directional match scores."""
    return (scorer.score(a, b, topic) + scorer.score(b, a, topic)) / 2.0


def lexical_score(a: str, b: str) -> float:
    """Jaccard similarity of lowercased token sets; 0 when both are empty."""
    ta = {t.lower() for t in tokens(a)}
    tb = {t.lower() for t in tokens(b)}
    if not ta and not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


class LexicalScorer:
    """Offline fallback match scorer: token-set Jaccard, topic ignored."""

    def score(self, a: str, b: str, topic: str) -> float:
        return lexical_score(a, b)


class HeuristicQualityScorer:
    """Deterministic offline quality stand-in favoring shorter texts.

    Used only when no real quality source (table section, per-record values,
    or remote model) is available.
    """

    def quality(self, text: str, topic: str) -> float:
        n = len(tokens(text))
        if n == 0:
            return 0.0
        return 1.0 / (1.0 + n / 10.0)


class ScoreTable:
    """Match scorer backed by an explicit (a, b, topic) -> score mapping.

    Unknown pairs score ``default_score`` unless ``strict``, in which case
    they raise. Keys are exact text bytes, no normalization.
    """

    def __init__(
        self,
        entries: Optional[dict[Pair, float]] = None,
        default_score: float = 0.0,
        strict: bool = False,
    ):
        self._entries: dict[Pair, float] = {}
        self.default_score = _check_range(default_score, "score table default")
        self.strict = strict
        if entries:
            for key, value in entries.items():
                self.put(*key, value)

    def put(self, a: str, b: str, topic: str, value: float) -> None:
        self._entries[(a, b, topic)] = _check_range(value, f"score table entry {(a, b, topic)!r}")

    def score(self, a: str, b: str, topic: str) -> float:
        key = (a, b, topic)
        if key in self._entries:
            return self._entries[key]
        if self.strict:
            raise ScorerError(f"no stored score for {key!r}")
        return self.default_score

    def __len__(self) -> int:
        return len(self._entries)


class TableQualityScorer:
    """Quality scorer backed by a (text, topic) -> score mapping."""

    def __init__(
        self,
        entries: Optional[dict[tuple[str, str], float]] = None,
        default_score: float = 0.0,
        strict: bool = False,
    ):
        self._entries = dict(entries or {})
        for key, value in self._entries.items():
            _check_range(value, f"quality table entry {key!r}")
        self.default_score = _check_range(default_score, "quality table default")
        self.strict = strict

    def quality(self, text: str, topic: str) -> float:
        key = (text, topic)
        if key in self._entries:
            return self._entries[key]
        if self.strict:
            raise ScorerError(f"no stored quality for {key!r}")
        return self.default_score


def load_score_table(path: str | Path) -> tuple[ScoreTable, Optional[TableQualityScorer]]:
    """Load a score-table file: {"default", "strict", "match": [...], "quality": [...]}.

    Match entries are {"a", "b", "topic", "score"}; quality entries are
    {"text", "topic", "score"}. The quality section is optional.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"score table not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed score table {path}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise DataError(f"score table {path} must be a JSON object")
    default = float(doc.get("default", 0.0))
    strict = bool(doc.get("strict", False))
    table = ScoreTable(default_score=default, strict=strict)
    for i, rec in enumerate(doc.get("match", [])):
        try:
            table.put(rec["a"], rec["b"], rec["topic"], float(rec["score"]))
        except (KeyError, TypeError) as exc:
            raise DataError(f"bad match entry {i} in {path}: {exc}") from None
    quality = None
    if "quality" in doc:
        entries = {}
        for i, rec in enumerate(doc["quality"]):
            try:
                entries[(rec["text"], rec["topic"])] = float(rec["score"])
            except (KeyError, TypeError) as exc:
                raise DataError(f"bad quality entry {i} in {path}: {exc}") from None
        quality = TableQualityScorer(entries, default_score=default, strict=strict)
    return table, quality


class ScoreCache:
    """Thread-safe (a, b, topic) -> score cache with hit/miss counters."""

    def __init__(self) -> None:
        self._data: dict[Pair, float] = {}
        self._lock = Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: Pair) -> Optional[float]:
        with self._lock:
            if key in self._data:
                self.hits += 1
                return self._data[key]
            self.misses += 1
            return None

    def put(self, key: Pair, value: float) -> None:
        with self._lock:
            self._data[key] = value

    def __len__(self) -> int:
        return len(self._data)


class CachingScorer:
    """Transparent caching wrapper around any match scorer."""

    def __init__(self, inner: MatchScorer, cache: Optional[ScoreCache] = None):
        self.inner = inner
        self.cache = cache or ScoreCache()

    def score(self, a: str, b: str, topic: str) -> float:
        key = (a, b, topic)
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        value = self.inner.score(a, b, topic)
        self.cache.put(key, value)
        return value


class RemoteScorer:
    """Client for the match-scoring wire protocol.

    POSTs ``{"pairs": [{"comment", "key_point", "topic"}]}`` to
    ``<endpoint>/v1/match_scores`` in batches, expects ``{"scores": [...]}``
    positionally, validates the range, retries transport failures with
    exponential backoff, and caches results by (comment, key_point, topic).
    """

    def __init__(
        self,
        endpoint: str,
        batch_size: int = 64,
        retries: int = 3,
        backoff: float = 0.1,
        cache: Optional[ScoreCache] = None,
        client: Optional[httpx.Client] = None,
    ):
        if batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.batch_size = batch_size
        self.retries = retries
        self.backoff = backoff
        self.cache = cache or ScoreCache()
        self._client = client or httpx.Client(timeout=30.0)

    def _post(self, path: str, body: dict) -> dict:
        url = self.endpoint + path
        last_exc: Optional[Exception] = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._client.post(url, json=body)
                if resp.status_code >= 500:
                    raise TransportError(f"{url} returned {resp.status_code}")
                if resp.status_code != 200:
                    raise ProtocolError(f"{url} returned {resp.status_code}: {resp.text[:200]}")
                return resp.json()
            except (httpx.TransportError, TransportError) as exc:
                last_exc = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (2**attempt))
        raise TransportError(f"{url} unreachable after {self.retries + 1} attempts: {last_exc}")

    def _fetch_scores(self, pairs: Sequence[Pair]) -> list[float]:
        payload = {
            "pairs": [{"comment": a, "key_point": b, "topic": t} for a, b, t in pairs]
        }
        doc = self._post("/v1/match_scores", payload)
        scores = doc.get("scores")
        if not isinstance(scores, list) or len(scores) != len(pairs):
            raise ProtocolError(
                f"expected {len(pairs)} scores, got {scores!r}"
            )
        return [_check_range(float(s), "remote score") for s in scores]

    def score_batch(self, pairs: Sequence[Pair]) -> list[float]:
        """Score many pairs, serving repeats from the cache."""
        results: dict[int, float] = {}
        missing: list[tuple[int, Pair]] = []
        for i, pair in enumerate(pairs):
            cached = self.cache.get(pair)
            if cached is not None:
                results[i] = cached
            else:
                missing.append((i, pair))
        for start in range(0, len(missing), self.batch_size):
            chunk = missing[start : start + self.batch_size]
            scores = self._fetch_scores([p for _, p in chunk])
            for (i, pair), value in zip(chunk, scores):
                self.cache.put(pair, value)
                results[i] = value
        return [results[i] for i in range(len(pairs))]

    def score(self, a: str, b: str, topic: str) -> float:
        return self.score_batch([(a, b, topic)])[0]


class RemoteQualityScorer:
    """Client for the quality wire protocol (``POST /v1/quality``)."""

    def __init__(
        self,
        endpoint: str,
        batch_size: int = 64,
        retries: int = 3,
        backoff: float = 0.1,
        client: Optional[httpx.Client] = None,
    ):
        self._remote = RemoteScorer(
            endpoint, batch_size=batch_size, retries=retries, backoff=backoff, client=client
        )
        self._cache: dict[tuple[str, str], float] = {}

    def quality_batch(self, items: Sequence[tuple[str, str]]) -> list[float]:
        results: dict[int, float] = {}
        missing: list[tuple[int, tuple[str, str]]] = []
        for i, item in enumerate(items):
            if item in self._cache:
                results[i] = self._cache[item]
            else:
                missing.append((i, item))
        for start in range(0, len(missing), self._remote.batch_size):
            chunk = missing[start : start + self._remote.batch_size]
            payload = {"items": [{"text": t, "topic": topic} for _, (t, topic) in chunk]}
            doc = self._remote._post("/v1/quality", payload)
            scores = doc.get("scores")
            if not isinstance(scores, list) or len(scores) != len(chunk):
                raise ProtocolError(f"expected {len(chunk)} scores, got {scores!r}")
            for (i, item), value in zip(chunk, scores):
                checked = _check_range(float(value), "remote quality")
                self._cache[item] = checked
                results[i] = checked
        return [results[i] for i in range(len(items))]

    def quality(self, text: str, topic: str) -> float:
        return self.quality_batch([(text, topic)])[0]


def remote_score(endpoint: str, pairs: Sequence[Pair], **kwargs) -> list[float]:
    """One-shot batch scoring against a remote endpoint."""
    return RemoteScorer(endpoint, **kwargs).score_batch(pairs)
