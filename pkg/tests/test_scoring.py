import json

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kpa.errors import DataError, ProtocolError, ScorerError, TransportError
from kpa.scoring import (
    CachingScorer,
    HeuristicQualityScorer,
    LexicalScorer,
    RemoteQualityScorer,
    RemoteScorer,
    ScoreCache,
    ScoreTable,
    TableQualityScorer,
    lexical_score,
    load_score_table,
    remote_score,
    score_pairs,
    symmetric_score,
)


class TestLexical:
    @pytest.mark.parametrize(
        "a,b,expected",
        [
            ("city needs parks", "city parks", 2 / 3),
            ("same words here", "same words here", 1.0),
            ("alpha beta", "gamma delta", 0.0),
            ("", "", 0.0),
            ("one", "", 0.0),
        ],
    )
    def test_values(self, a, b, expected):
        assert lexical_score(a, b) == pytest.approx(expected)

    def test_case_and_punctuation_insensitive(self):
        assert lexical_score("Fix the Roads!", "fix the roads") == 1.0

    def test_scorer_ignores_topic(self):
        s = LexicalScorer()
        assert s.score("a b", "a b", "t1") == s.score("a b", "a b", "t2") == 1.0

    @given(st.text(), st.text())
    def test_symmetric_and_bounded(self, a, b):
        v = lexical_score(a, b)
        assert 0.0 <= v <= 1.0
        assert v == lexical_score(b, a)


class FixedScorer:
    """Directional scorer from an explicit (a, b) -> score dict."""

    def __init__(self, table):
        self.table = table
        self.calls = 0

    def score(self, a, b, topic):
        self.calls += 1
        return self.table[(a, b)]


class TestSymmetricScore:
    def test_average(self):
        s = FixedScorer({("x", "y"): 0.6, ("y", "x"): 0.8})
        assert symmetric_score(s, "x", "y", "t") == pytest.approx(0.7)

    def test_extremes(self):
        s = FixedScorer({("x", "y"): 1.0, ("y", "x"): 0.0})
        assert symmetric_score(s, "x", "y", "t") == pytest.approx(0.5)


class TestScorePairs:
    def test_aligned_with_per_pair_calls(self):
        s = LexicalScorer()
        pairs = [("a b", "a b", "t"), ("a b", "c d", "t"), ("a", "a c", "t")]
        assert score_pairs(s, pairs) == [s.score(*p) for p in pairs]

    def test_error_reports_pair_index(self):
        table = ScoreTable({("a", "b", "t"): 0.5}, strict=True)
        with pytest.raises(ScorerError, match="pair 1:"):
            score_pairs(table, [("a", "b", "t"), ("missing", "b", "t")])


class TestScoreTable:
    def test_lookup_and_default(self):
        table = ScoreTable({("c", "k", "t"): 0.9}, default_score=0.25)
        assert table.score("c", "k", "t") == 0.9
        assert table.score("other", "k", "t") == 0.25

    def test_exact_text_keys(self):
        table = ScoreTable({("c", "k", "t"): 0.9})
        assert table.score("c ", "k", "t") == 0.0
        assert table.score("C", "k", "t") == 0.0

    def test_strict_raises(self):
        table = ScoreTable(strict=True)
        with pytest.raises(ScorerError, match="no stored score"):
            table.score("a", "b", "t")

    def test_range_validation(self):
        with pytest.raises(ProtocolError):
            ScoreTable({("a", "b", "t"): 1.5})
        with pytest.raises(ProtocolError):
            ScoreTable(default_score=-0.1)

    def test_put_overwrites(self):
        table = ScoreTable()
        table.put("a", "b", "t", 0.3)
        table.put("a", "b", "t", 0.6)
        assert table.score("a", "b", "t") == 0.6
        assert len(table) == 1


class TestTableQuality:
    def test_lookup_default_strict(self):
        q = TableQualityScorer({("text", "t"): 0.8}, default_score=0.1)
        assert q.quality("text", "t") == 0.8
        assert q.quality("unknown", "t") == 0.1
        strict = TableQualityScorer({}, strict=True)
        with pytest.raises(ScorerError, match="no stored quality"):
            strict.quality("x", "t")


class TestHeuristicQuality:
    def test_shorter_scores_higher(self):
        q = HeuristicQualityScorer()
        assert q.quality("short text", "t") > q.quality("a much longer piece of text here", "t")
        assert q.quality("", "t") == 0.0

    @given(st.text())
    def test_bounded(self, text):
        assert 0.0 <= HeuristicQualityScorer().quality(text, "t") <= 1.0


class TestLoadScoreTable:
    def write(self, tmp_path, doc):
        path = tmp_path / "table.json"
        path.write_text(json.dumps(doc))
        return path

    def test_full_file(self, tmp_path):
        path = self.write(
            tmp_path,
            {
                "default": 0.2,
                "strict": False,
                "match": [{"a": "c1", "b": "k1", "topic": "t", "score": 0.9}],
                "quality": [{"text": "c1", "topic": "t", "score": 0.7}],
            },
        )
        table, quality = load_score_table(path)
        assert table.score("c1", "k1", "t") == 0.9
        assert table.score("nope", "k1", "t") == 0.2
        assert quality is not None
        assert quality.quality("c1", "t") == 0.7
        assert quality.quality("nope", "t") == 0.2

    def test_quality_section_optional(self, tmp_path):
        path = self.write(tmp_path, {"match": []})
        table, quality = load_score_table(path)
        assert quality is None
        assert table.score("a", "b", "t") == 0.0

    def test_strict_propagates(self, tmp_path):
        path = self.write(tmp_path, {"strict": True, "match": []})
        table, _ = load_score_table(path)
        with pytest.raises(ScorerError):
            table.score("a", "b", "t")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(DataError, match="malformed score table"):
            load_score_table(path)

    def test_bad_entry(self, tmp_path):
        path = self.write(tmp_path, {"match": [{"a": "c1", "topic": "t", "score": 0.5}]})
        with pytest.raises(DataError, match="bad match entry 0"):
            load_score_table(path)


class TestCache:
    def test_hit_miss_counters(self):
        cache = ScoreCache()
        assert cache.get(("a", "b", "t")) is None
        cache.put(("a", "b", "t"), 0.5)
        assert cache.get(("a", "b", "t")) == 0.5
        assert (cache.hits, cache.misses) == (1, 1)

    def test_caching_scorer_calls_inner_once(self):
        inner = FixedScorer({("a", "b"): 0.4})
        scorer = CachingScorer(inner)
        for _ in range(5):
            assert scorer.score("a", "b", "t") == 0.4
        assert inner.calls == 1

    def test_caching_scorer_distinguishes_topic(self):
        inner = FixedScorer({("a", "b"): 0.4})
        scorer = CachingScorer(inner)
        scorer.score("a", "b", "t1")
        scorer.score("a", "b", "t2")
        assert inner.calls == 2


class MockServer:
    """httpx.MockTransport handler emulating the scoring wire protocol."""

    def __init__(self, score_fn=None, fail_first=0, status=200):
        self.score_fn = score_fn or (lambda pair: 0.5)
        self.fail_first = fail_first
        self.status = status
        self.requests = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        self.requests.append((request.url.path, body))
        if self.fail_first > 0:
            self.fail_first -= 1
            return httpx.Response(503, json={"error": "flaky"})
        if self.status != 200:
            return httpx.Response(self.status, json={"error": "nope"})
        if request.url.path == "/v1/match_scores":
            scores = [self.score_fn(p) for p in body["pairs"]]
        else:
            scores = [self.score_fn(p) for p in body["items"]]
        return httpx.Response(200, json={"scores": scores})


def make_remote(server, **kwargs):
    client = httpx.Client(transport=httpx.MockTransport(server))
    kwargs.setdefault("backoff", 0.0)
    return RemoteScorer("http://scorer.test", client=client, **kwargs)


class TestRemoteScorer:
    def test_request_shape_and_alignment(self):
        server = MockServer(score_fn=lambda p: 0.9 if p["comment"] == "c1" else 0.1)
        remote = make_remote(server)
        scores = remote.score_batch([("c1", "k", "t"), ("c2", "k", "t")])
        assert scores == [0.9, 0.1]
        path, body = server.requests[0]
        assert path == "/v1/match_scores"
        assert body == {
            "pairs": [
                {"comment": "c1", "key_point": "k", "topic": "t"},
                {"comment": "c2", "key_point": "k", "topic": "t"},
            ]
        }

    def test_batching_caps_request_size(self):
        server = MockServer()
        remote = make_remote(server, batch_size=64)
        pairs = [(f"c{i}", "k", "t") for i in range(150)]
        remote.score_batch(pairs)
        sizes = [len(body["pairs"]) for _, body in server.requests]
        assert sizes == [64, 64, 22]

    def test_retries_transport_failures(self):
        server = MockServer(fail_first=2)
        remote = make_remote(server, retries=3)
        assert remote.score("c", "k", "t") == 0.5
        assert len(server.requests) == 3

    def test_gives_up_after_retries(self):
        server = MockServer(fail_first=10)
        remote = make_remote(server, retries=3)
        with pytest.raises(TransportError, match="after 4 attempts"):
            remote.score("c", "k", "t")
        assert len(server.requests) == 4

    def test_connect_error_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            raise httpx.ConnectError("refused", request=request)

        client = httpx.Client(transport=httpx.MockTransport(handler))
        remote = RemoteScorer("http://scorer.test", retries=2, backoff=0.0, client=client)
        with pytest.raises(TransportError):
            remote.score("c", "k", "t")
        assert calls["n"] == 3

    def test_client_error_not_retried(self):
        server = MockServer(status=422)
        remote = make_remote(server)
        with pytest.raises(ProtocolError, match="422"):
            remote.score("c", "k", "t")
        assert len(server.requests) == 1

    def test_out_of_range_score_rejected(self):
        server = MockServer(score_fn=lambda p: 1.5)
        remote = make_remote(server)
        with pytest.raises(ProtocolError, match="outside"):
            remote.score("c", "k", "t")

    def test_wrong_score_count_rejected(self):
        def handler(request):
            return httpx.Response(200, json={"scores": [0.5, 0.5]})

        client = httpx.Client(transport=httpx.MockTransport(handler))
        remote = RemoteScorer("http://scorer.test", backoff=0.0, client=client)
        with pytest.raises(ProtocolError, match="expected 1 scores"):
            remote.score("c", "k", "t")

    def test_cache_dedupes_repeats(self):
        server = MockServer()
        remote = make_remote(server)
        remote.score("c", "k", "t")
        remote.score("c", "k", "t")
        remote.score_batch([("c", "k", "t"), ("c2", "k", "t")])
        fetched = [p for _, body in server.requests for p in body["pairs"]]
        assert len(fetched) == 2

    def test_remote_score_helper(self):
        server = MockServer()
        client = httpx.Client(transport=httpx.MockTransport(server))
        scores = remote_score(
            "http://scorer.test", [("c", "k", "t")], client=client, backoff=0.0
        )
        assert scores == [0.5]


class TestRemoteQuality:
    def test_request_shape(self):
        server = MockServer(score_fn=lambda item: 0.8)
        client = httpx.Client(transport=httpx.MockTransport(server))
        q = RemoteQualityScorer("http://scorer.test", backoff=0.0, client=client)
        assert q.quality("some text", "t") == 0.8
        path, body = server.requests[0]
        assert path == "/v1/quality"
        assert body == {"items": [{"text": "some text", "topic": "t"}]}

    def test_cached(self):
        server = MockServer(score_fn=lambda item: 0.8)
        client = httpx.Client(transport=httpx.MockTransport(server))
        q = RemoteQualityScorer("http://scorer.test", backoff=0.0, client=client)
        q.quality("some text", "t")
        q.quality("some text", "t")
        assert len(server.requests) == 1
