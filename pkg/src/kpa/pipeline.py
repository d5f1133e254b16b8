"""End-to-end analysis and evaluation orchestration.

Per-domain profiles bundle the filter, candidate, and matching defaults;
a TOML config file and keyword overrides refine them. Structured reports
are deterministic JSON (sorted keys, no timestamps) and round-trip through
``parse_report``.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

import tomli

from .errors import ConfigError, DataError
from .evaluation import Metrics, metrics_from_predictions, policy_predictions, tune_threshold
from .extraction import (
    PRONOUN_BLOCKLIST,
    CandidateConfig,
    KeyPointCandidate,
    extract_candidates,
)
from .ingest import (
    Comment,
    Dataset,
    FilterConfig,
    LabeledPair,
    filter_comments,
    first_sentence,
    with_scores,
)
from .policies import Policy, PolicyKind
from .scoring import (
    HeuristicQualityScorer,
    LexicalScorer,
    MatchScorer,
    QualityScorer,
    RemoteQualityScorer,
    RemoteScorer,
    TableQualityScorer,
    load_score_table,
    score_pairs,
)
from .selection import (
    COMMENT,
    FinalMatch,
    KeyPointResult,
    Match,
    MatchItem,
    final_match,
    select_key_points,
    truncate_key_points,
)

DOMAINS = ("arguments", "survey", "reviews")

REPORT_FORMATS = ("structured", "table")


@dataclass(frozen=True)
class AnalysisConfig:
    domain: str
    filter: FilterConfig
    candidates: CandidateConfig
    selection_threshold: float
    max_kps: int
    policy: Policy
    scorer: str = "lexical"
    seed: int = 0
    per_stance: bool = False
    rematch_threshold: Optional[float] = None

    def __post_init__(self) -> None:
        if self.domain not in DOMAINS:
            raise ConfigError(f"unknown domain {self.domain!r}")
        if not 0.0 <= self.selection_threshold <= 1.0:
            raise ConfigError("selection_threshold must lie in [0,1]")
        if self.rematch_threshold is not None and not 0.0 <= self.rematch_threshold <= 1.0:
            raise ConfigError("rematch_threshold must lie in [0,1]")
        if self.max_kps < 1:
            raise ConfigError("max_kps must be >= 1")


def default_config(domain: str) -> AnalysisConfig:
    """Built-in per-domain profile."""
    if domain == "arguments":
        return AnalysisConfig(
            domain="arguments",
            filter=FilterConfig(low_quality_fraction=0.10),
            candidates=CandidateConfig(max_tokens=12, min_quality=0.7),
            selection_threshold=0.856,
            max_kps=10,
            policy=Policy(PolicyKind.BM),
            per_stance=True,
        )
    if domain == "survey":
        return AnalysisConfig(
            domain="survey",
            filter=FilterConfig(first_sentence_only=True),
            candidates=CandidateConfig(max_tokens=10, min_quality=0.4),
            selection_threshold=0.856,
            max_kps=20,
            policy=Policy(PolicyKind.BM),
        )
    if domain == "reviews":
        return AnalysisConfig(
            domain="reviews",
            filter=FilterConfig(),
            candidates=CandidateConfig(max_tokens=12, min_quality=0.35),
            selection_threshold=0.999,
            max_kps=2,
            policy=Policy(PolicyKind.BM),
        )
    raise ConfigError(f"unknown domain {domain!r}")


_TOP_KEYS = {
    "domain",
    "selection_threshold",
    "rematch_threshold",
    "max_kps",
    "policy",
    "threshold",
    "scorer",
    "seed",
    "per_stance",
    "filter",
    "candidates",
}
_FILTER_KEYS = {
    "min_chars",
    "min_tokens",
    "max_tokens",
    "ascii_only",
    "first_sentence_only",
    "low_quality_fraction",
    "low_quality_per_topic",
}
_CANDIDATE_KEYS = {"max_tokens", "min_quality"}


def _check_keys(values: Mapping, allowed: set[str], where: str) -> None:
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} option(s): {', '.join(unknown)}")


def config_from_values(values: Mapping, base: Optional[AnalysisConfig] = None) -> AnalysisConfig:
    """Overlay a parsed config mapping on a base (or the domain profile)."""
    _check_keys(values, _TOP_KEYS, "config")
    if base is None:
        domain = values.get("domain")
        if domain is None:
            raise ConfigError("config needs a domain")
        base = default_config(domain)
    elif "domain" in values and values["domain"] != base.domain:
        base = default_config(values["domain"])

    filter_cfg = base.filter
    if "filter" in values:
        _check_keys(values["filter"], _FILTER_KEYS, "[filter]")
        filter_cfg = replace(filter_cfg, **values["filter"])
    cand_cfg = base.candidates
    if "candidates" in values:
        _check_keys(values["candidates"], _CANDIDATE_KEYS, "[candidates]")
        cand_cfg = replace(cand_cfg, **values["candidates"])

    policy = base.policy
    if "policy" in values or "threshold" in values:
        kind = values.get("policy", policy.kind.value)
        if "threshold" in values:
            threshold = values["threshold"]
        elif kind == policy.kind.value:
            threshold = policy.threshold
        else:
            threshold = None
        policy = Policy.parse(kind, threshold)

    return replace(
        base,
        filter=filter_cfg,
        candidates=cand_cfg,
        policy=policy,
        selection_threshold=values.get("selection_threshold", base.selection_threshold),
        rematch_threshold=values.get("rematch_threshold", base.rematch_threshold),
        max_kps=values.get("max_kps", base.max_kps),
        scorer=values.get("scorer", base.scorer),
        seed=values.get("seed", base.seed),
        per_stance=values.get("per_stance", base.per_stance),
    )


def read_config_values(path: str | Path) -> dict:
    """Raw key-value mapping from a TOML config file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None


def load_config(path: str | Path, base: Optional[AnalysisConfig] = None) -> AnalysisConfig:
    return config_from_values(read_config_values(path), base)


def config_to_dict(cfg: AnalysisConfig) -> dict:
    """JSON-serializable snapshot of a config (embedded in reports)."""
    return {
        "domain": cfg.domain,
        "filter": {
            "min_chars": cfg.filter.min_chars,
            "min_tokens": cfg.filter.min_tokens,
            "max_tokens": cfg.filter.max_tokens,
            "ascii_only": cfg.filter.ascii_only,
            "first_sentence_only": cfg.filter.first_sentence_only,
            "low_quality_fraction": cfg.filter.low_quality_fraction,
            "low_quality_per_topic": cfg.filter.low_quality_per_topic,
        },
        "candidates": {
            "max_tokens": cfg.candidates.max_tokens,
            "min_quality": cfg.candidates.min_quality,
        },
        "selection_threshold": cfg.selection_threshold,
        "rematch_threshold": cfg.rematch_threshold,
        "max_kps": cfg.max_kps,
        "policy": {"kind": cfg.policy.kind.value, "threshold": cfg.policy.threshold},
        "scorer": cfg.scorer,
        "seed": cfg.seed,
        "per_stance": cfg.per_stance,
    }


def resolve_scorers(
    selector: str, comments: Sequence[Comment] = ()
) -> tuple[MatchScorer, QualityScorer]:
    """Build (match scorer, quality scorer) from a selector string.

    Selectors: ``lexical``, ``table:<path>``, ``remote:<url>``. Quality falls
    back, in order, to the table's quality section, per-record quality (when
    every comment carries one), the remote quality endpoint, and the length
    heuristic.
    """
    remote_url = None
    table_quality = None
    if selector == "lexical":
        match: MatchScorer = LexicalScorer()
    elif selector.startswith("table:"):
        match, table_quality = load_score_table(selector[len("table:") :])
    elif selector.startswith("remote:"):
        remote_url = selector[len("remote:") :]
        match = RemoteScorer(remote_url)
    else:
        raise ConfigError(
            f"unknown scorer selector {selector!r} (expected lexical, table:<path>, or remote:<url>)"
        )
    quality: Optional[QualityScorer] = table_quality
    if quality is None and comments and all(c.quality is not None for c in comments):
        quality = TableQualityScorer(
            {(c.analysis_text, c.topic_id): c.quality for c in comments}
        )
    if quality is None and remote_url is not None:
        quality = RemoteQualityScorer(remote_url)
    if quality is None:
        quality = HeuristicQualityScorer()
    return match, quality


@dataclass(frozen=True)
class GroupResult:
    """Analysis outcome for one (topic, stance) group."""

    topic: str
    stance: Optional[str]
    comment_count: int
    candidate_count: int
    key_points: tuple[KeyPointResult, ...]
    assignments: dict[str, Optional[tuple[str, float]]]
    unmatched: tuple[str, ...]

    @property
    def coverage(self) -> float:
        if self.comment_count == 0:
            return 0.0
        return (self.comment_count - len(self.unmatched)) / self.comment_count


@dataclass(frozen=True)
class AnalysisResult:
    dataset_name: str
    domain: str
    config: dict
    input_comments: int
    analyzed_comments: int
    groups: tuple[GroupResult, ...]


def _group_key(comment: Comment, per_stance: bool) -> tuple[str, Optional[str]]:
    return (comment.topic_id, comment.stance if per_stance else None)


def run_analysis(
    dataset: Dataset,
    cfg: AnalysisConfig,
    match_scorer: MatchScorer,
    quality_scorer: QualityScorer,
) -> AnalysisResult:
    """Filter, extract candidates, select key points, and match, per group."""
    if not dataset.comments:
        raise DataError("dataset has no comments")
    comments = list(dataset.comments)
    if cfg.filter.first_sentence_only:
        comments = [replace(c, analysis_text=first_sentence(c.raw_text)) for c in comments]
    analyzed = filter_comments(comments, cfg.filter, quality_scorer)

    groups: dict[tuple[str, Optional[str]], list[Comment]] = {}
    for comment in analyzed:
        groups.setdefault(_group_key(comment, cfg.per_stance), []).append(comment)

    results = []
    for key in sorted(groups, key=lambda k: (k[0], k[1] or "")):
        topic, stance = key
        group = groups[key]
        candidates = extract_candidates(group, cfg.candidates, quality_scorer)
        empty = GroupResult(
            topic=topic,
            stance=stance,
            comment_count=len(group),
            candidate_count=len(candidates),
            key_points=(),
            assignments={c.id: None for c in group},
            unmatched=tuple(c.id for c in group),
        )
        if not candidates:
            results.append(empty)
            continue
        ranked = select_key_points(
            group,
            candidates,
            cfg.selection_threshold,
            match_scorer,
            topic,
            rematch_t=cfg.rematch_threshold,
        )
        kps = truncate_key_points(ranked, cfg.max_kps)
        if not kps:
            results.append(empty)
            continue
        fm = final_match(group, kps, cfg.policy, match_scorer, topic)
        results.append(
            GroupResult(
                topic=topic,
                stance=stance,
                comment_count=len(group),
                candidate_count=len(candidates),
                key_points=fm.results,
                assignments=fm.assignments,
                unmatched=fm.unmatched,
            )
        )
    return AnalysisResult(
        dataset_name=dataset.name,
        domain=dataset.domain,
        config=config_to_dict(cfg),
        input_comments=len(dataset.comments),
        analyzed_comments=len(analyzed),
        groups=tuple(results),
    )


def _percent(fraction: float) -> int:
    return int(math.floor(fraction * 100 + 0.5))


def _kp_to_dict(kp: KeyPointResult) -> dict:
    return {
        "id": kp.key_point.id,
        "text": kp.key_point.text,
        "source_comment_id": kp.key_point.source_comment_id,
        "token_count": kp.key_point.token_count,
        "quality": kp.key_point.quality,
        "match_count": kp.match_count,
        "comment_count": kp.comment_count,
        "prevalence": kp.prevalence,
        "percent": _percent(kp.prevalence),
        "matched": [
            {"id": m.item.id, "kind": m.item.kind, "text": m.item.text, "score": m.score}
            for m in kp.matched
        ],
    }


def result_to_dict(result: AnalysisResult) -> dict:
    return {
        "dataset": {"name": result.dataset_name, "domain": result.domain},
        "config": result.config,
        "input_comments": result.input_comments,
        "analyzed_comments": result.analyzed_comments,
        "groups": [
            {
                "topic": g.topic,
                "stance": g.stance,
                "comment_count": g.comment_count,
                "candidate_count": g.candidate_count,
                "coverage": g.coverage,
                "key_points": [_kp_to_dict(kp) for kp in g.key_points],
                "assignments": {
                    cid: (
                        None
                        if assignment is None
                        else {"key_point": assignment[0], "score": assignment[1]}
                    )
                    for cid, assignment in g.assignments.items()
                },
                "unmatched": list(g.unmatched),
            }
            for g in result.groups
        ],
    }


def _human_table(result: AnalysisResult) -> str:
    lines = [f"dataset: {result.dataset_name} ({result.domain})"]
    lines.append(
        f"comments: {result.analyzed_comments} analyzed of {result.input_comments} input"
    )
    for g in result.groups:
        stance = f", stance {g.stance}" if g.stance else ""
        lines.append("")
        lines.append(
            f"topic: {g.topic}{stance} "
            f"({g.comment_count} comments, {g.candidate_count} candidates, "
            f"coverage {_percent(g.coverage)}%)"
        )
        if not g.key_points:
            lines.append("  (no key points)")
        for kp in g.key_points:
            lines.append(
                f"  {_percent(kp.prevalence):3d}% ({kp.comment_count:>3}) {kp.key_point.text}"
            )
        if g.unmatched:
            lines.append(f"  unmatched: {len(g.unmatched)}")
    return "\n".join(lines) + "\n"


def emit_report(result: AnalysisResult, fmt: str = "structured") -> str:
    """Render an analysis result as deterministic JSON or a human table."""
    if fmt == "structured":
        return json.dumps(result_to_dict(result), sort_keys=True, indent=2) + "\n"
    if fmt == "table":
        return _human_table(result)
    raise ConfigError(f"unknown report format {fmt!r} (expected structured or table)")


def _kp_from_dict(doc: dict, comment_total: int) -> KeyPointResult:
    candidate = KeyPointCandidate(
        id=doc["id"],
        source_comment_id=doc["source_comment_id"],
        text=doc["text"],
        token_count=doc["token_count"],
        quality=doc["quality"],
    )
    matched = tuple(
        Match(MatchItem(m["id"], m["text"], m["kind"]), m["score"]) for m in doc["matched"]
    )
    return KeyPointResult(key_point=candidate, matched=matched, comment_total=comment_total)


def parse_report(doc: str) -> AnalysisResult:
    """Inverse of ``emit_report(..., "structured")``."""
    try:
        data = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed report: {exc.msg}") from None
    try:
        groups = tuple(
            GroupResult(
                topic=g["topic"],
                stance=g["stance"],
                comment_count=g["comment_count"],
                candidate_count=g["candidate_count"],
                key_points=tuple(
                    _kp_from_dict(kp, g["comment_count"]) for kp in g["key_points"]
                ),
                assignments={
                    cid: (None if a is None else (a["key_point"], a["score"]))
                    for cid, a in g["assignments"].items()
                },
                unmatched=tuple(g["unmatched"]),
            )
            for g in data["groups"]
        )
        return AnalysisResult(
            dataset_name=data["dataset"]["name"],
            domain=data["dataset"]["domain"],
            config=data["config"],
            input_comments=data["input_comments"],
            analyzed_comments=data["analyzed_comments"],
            groups=groups,
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"report missing field: {exc}") from None


@dataclass(frozen=True)
class Fold:
    train: tuple[str, ...]
    dev: tuple[str, ...]
    test: tuple[str, ...]


@dataclass(frozen=True)
class FoldSpec:
    folds: tuple[Fold, ...]


def make_folds(
    topics: Iterable[str], n_folds: int = 4, dev_size: int = 4, seed: int = 0
) -> FoldSpec:
    """Cross-validation folds over topics; each topic is tested exactly once.

    Topics are shuffled once (seeded), split into ``n_folds`` near-equal test
    chunks; each fold's dev set is the next ``dev_size`` topics after its test
    chunk (cyclically), and the rest train.
    """
    ts = sorted(topics)
    if len(ts) != len(set(ts)):
        raise DataError("duplicate topics")
    n = len(ts)
    if n_folds < 1:
        raise ConfigError("n_folds must be >= 1")
    if dev_size < 0:
        raise ConfigError("dev_size must be >= 0")
    if n < n_folds:
        raise DataError(f"{n} topics cannot fill {n_folds} folds")
    order = ts[:]
    random.Random(seed).shuffle(order)
    base, rem = divmod(n, n_folds)
    folds = []
    start = 0
    for i in range(n_folds):
        size = base + (1 if i < rem else 0)
        if dev_size > n - size:
            raise ConfigError("dev_size too large for fold size")
        test = order[start : start + size]
        dev = [order[(start + size + j) % n] for j in range(dev_size)]
        taken = set(test) | set(dev)
        train = [t for t in order if t not in taken]
        if not train:
            raise ConfigError("fold leaves no training topics")
        folds.append(Fold(train=tuple(sorted(train)), dev=tuple(sorted(dev)), test=tuple(sorted(test))))
        start += size
    return FoldSpec(folds=tuple(folds))


@dataclass(frozen=True)
class PolicyEval:
    policy: str
    threshold: Optional[float]
    metrics: Metrics


@dataclass(frozen=True)
class FoldEval:
    fold: int
    test_topics: tuple[str, ...]
    results: tuple[PolicyEval, ...]


@dataclass(frozen=True)
class EvalReport:
    folds: tuple[FoldEval, ...]
    averages: tuple[PolicyEval, ...]


TUNED_POLICIES = ("th", "bm+th")


def _score_pairs(scorer: MatchScorer, pairs: Sequence[LabeledPair]) -> list[LabeledPair]:
    scores = score_pairs(scorer, [(p.comment_text, p.key_point_text, p.topic) for p in pairs])
    return with_scores(pairs, scores)


def run_matching_eval(
    pairs: Sequence[LabeledPair],
    fold_spec: FoldSpec,
    scorer: MatchScorer,
    policies: Sequence[str] = ("th", "bm", "bm+th"),
    scorer_for_fold: Optional[Callable[[int], MatchScorer]] = None,
) -> EvalReport:
    """Cross-validated matching evaluation.

    Thresholded policies tune their threshold on each fold's dev pairs and
    evaluate on its test pairs; metrics are averaged across folds.
    """
    if not pairs:
        raise DataError("no labeled pairs")
    for policy in policies:
        if policy not in ("th", "bm", "bm+th"):
            raise ConfigError(f"unknown policy {policy!r}")
    tested: dict[str, int] = {}
    for fold in fold_spec.folds:
        for t in fold.test:
            tested[t] = tested.get(t, 0) + 1
    pair_topics = {p.topic for p in pairs}
    bad = sorted(t for t in pair_topics if tested.get(t, 0) != 1)
    if bad:
        raise DataError(f"topics not tested exactly once: {', '.join(bad)}")

    fold_evals = []
    for i, fold in enumerate(fold_spec.folds):
        fold_scorer = scorer_for_fold(i) if scorer_for_fold else scorer
        test = [p for p in pairs if p.topic in set(fold.test)]
        if not test:
            raise DataError(f"fold {i} has no test pairs")
        test_scored = _score_pairs(fold_scorer, test)
        dev_scored: Optional[list[LabeledPair]] = None
        if any(p in TUNED_POLICIES for p in policies):
            dev = [p for p in pairs if p.topic in set(fold.dev)]
            if not dev:
                raise DataError(f"fold {i} has no dev pairs to tune on")
            dev_scored = _score_pairs(fold_scorer, dev)
        evals = []
        for policy in policies:
            threshold: Optional[float] = None
            if policy in TUNED_POLICIES:
                threshold, _ = tune_threshold(dev_scored, policy)
            predictions = policy_predictions(test_scored, policy, threshold)
            metrics = metrics_from_predictions(predictions, [p.label for p in test_scored])
            evals.append(PolicyEval(policy=policy, threshold=threshold, metrics=metrics))
        fold_evals.append(FoldEval(fold=i, test_topics=fold.test, results=tuple(evals)))

    averages = []
    for j, policy in enumerate(policies):
        per_fold = [fe.results[j] for fe in fold_evals]
        k = len(per_fold)
        mean = Metrics(
            accuracy=sum(pe.metrics.accuracy for pe in per_fold) / k,
            precision=sum(pe.metrics.precision for pe in per_fold) / k,
            recall=sum(pe.metrics.recall for pe in per_fold) / k,
            f1=sum(pe.metrics.f1 for pe in per_fold) / k,
        )
        thresholds = [pe.threshold for pe in per_fold if pe.threshold is not None]
        avg_t = sum(thresholds) / len(thresholds) if thresholds else None
        averages.append(PolicyEval(policy=policy, threshold=avg_t, metrics=mean))
    return EvalReport(folds=tuple(fold_evals), averages=tuple(averages))


def _policy_eval_to_dict(pe: PolicyEval) -> dict:
    return {
        "policy": pe.policy,
        "threshold": pe.threshold,
        "accuracy": pe.metrics.accuracy,
        "precision": pe.metrics.precision,
        "recall": pe.metrics.recall,
        "f1": pe.metrics.f1,
    }


def emit_eval_report(report: EvalReport) -> str:
    doc = {
        "folds": [
            {
                "fold": fe.fold,
                "test_topics": list(fe.test_topics),
                "policies": [_policy_eval_to_dict(pe) for pe in fe.results],
            }
            for fe in report.folds
        ],
        "averages": [_policy_eval_to_dict(pe) for pe in report.averages],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"
