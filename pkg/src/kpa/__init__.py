"""Key point analysis: extract, select, and quantify short key points in comment corpora."""

from .errors import (
    ConfigError,
    DataError,
    KpaError,
    ProtocolError,
    ScorerError,
    TransportError,
)
from .evaluation import (
    AnnotationSet,
    CoverageCurve,
    Metrics,
    annotator_kappa,
    cohen_kappa,
    confusion_metrics,
    fleiss_kappa,
    majority_label,
    precision_at_coverage,
    reliable_annotators,
    sample_uniform,
    split_consistency,
    tune_threshold,
)
from .extraction import CandidateConfig, KeyPointCandidate, extract_candidates
from .ingest import (
    Comment,
    Dataset,
    FilterConfig,
    LabeledPair,
    filter_comments,
    load_dataset,
    load_labeled_pairs,
    save_dataset,
)
from .pipeline import (
    AnalysisConfig,
    AnalysisResult,
    FoldSpec,
    default_config,
    emit_report,
    load_config,
    make_folds,
    parse_report,
    resolve_scorers,
    run_analysis,
    run_matching_eval,
)
from .policies import Policy, PolicyKind, apply_policy, best_match
from .scoring import (
    CachingScorer,
    LexicalScorer,
    MatchScorer,
    QualityScorer,
    RemoteScorer,
    ScoreCache,
    ScoreTable,
    lexical_score,
    load_score_table,
    remote_score,
    score_pairs,
    symmetric_score,
)
from .selection import (
    FinalMatch,
    KeyPointResult,
    Match,
    MatchItem,
    final_match,
    get_matches,
    select_key_points,
    truncate_key_points,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "AnalysisResult",
    "AnnotationSet",
    "CachingScorer",
    "CandidateConfig",
    "Comment",
    "ConfigError",
    "CoverageCurve",
    "DataError",
    "Dataset",
    "FilterConfig",
    "FinalMatch",
    "FoldSpec",
    "KeyPointCandidate",
    "KeyPointResult",
    "KpaError",
    "LabeledPair",
    "LexicalScorer",
    "Match",
    "MatchItem",
    "MatchScorer",
    "Metrics",
    "Policy",
    "PolicyKind",
    "ProtocolError",
    "QualityScorer",
    "RemoteScorer",
    "ScoreCache",
    "ScoreTable",
    "ScorerError",
    "TransportError",
    "annotator_kappa",
    "apply_policy",
    "best_match",
    "cohen_kappa",
    "confusion_metrics",
    "default_config",
    "emit_report",
    "extract_candidates",
    "filter_comments",
    "final_match",
    "fleiss_kappa",
    "get_matches",
    "lexical_score",
    "load_config",
    "load_dataset",
    "load_labeled_pairs",
    "load_score_table",
    "majority_label",
    "make_folds",
    "parse_report",
    "precision_at_coverage",
    "reliable_annotators",
    "remote_score",
    "resolve_scorers",
    "run_analysis",
    "run_matching_eval",
    "sample_uniform",
    "save_dataset",
    "score_pairs",
    "select_key_points",
    "split_consistency",
    "symmetric_score",
    "truncate_key_points",
    "tune_threshold",
]
