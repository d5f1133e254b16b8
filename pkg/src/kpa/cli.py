"""Command-line interface.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 scorer or
transport error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .errors import ConfigError, DataError, ScorerError
from .evaluation import (
    COVER_ALL,
    annotator_kappa,
    fleiss_kappa,
    load_annotations,
    load_labeled_sample,
    precision_at_coverage,
    reliable_annotators,
    split_consistency,
)
from .ingest import load_dataset, load_labeled_pairs
from .pipeline import (
    config_from_values,
    emit_eval_report,
    emit_report,
    make_folds,
    read_config_values,
    resolve_scorers,
    run_analysis,
    run_matching_eval,
)

PROG = "kpa"


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits 1 (not 2) on usage errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _write_out(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_analyze(args: argparse.Namespace) -> int:
    values = read_config_values(args.config) if args.config else {}
    if args.domain:
        values["domain"] = args.domain
    if "domain" not in values:
        raise ConfigError("domain required: pass --domain or set it in the config file")
    cfg = config_from_values(values)
    overrides: dict = {}
    if args.scorer is not None:
        overrides["scorer"] = args.scorer
    if args.max_kps is not None:
        overrides["max_kps"] = args.max_kps
    if args.policy is not None:
        overrides["policy"] = args.policy
    if args.threshold is not None:
        overrides["threshold"] = args.threshold
    if args.selection_threshold is not None:
        overrides["selection_threshold"] = args.selection_threshold
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = config_from_values(overrides, base=cfg)
    dataset = load_dataset(args.input, cfg.domain)
    match_scorer, quality_scorer = resolve_scorers(cfg.scorer, dataset.comments)
    result = run_analysis(dataset, cfg, match_scorer, quality_scorer)
    _write_out(emit_report(result, args.report_format), args.out)
    return 0


def _cmd_eval_match(args: argparse.Namespace) -> int:
    pairs = load_labeled_pairs(args.pairs)
    topics = sorted({p.topic for p in pairs})
    fold_spec = make_folds(topics, n_folds=args.folds, dev_size=args.dev_size, seed=args.seed)
    scorer, _ = resolve_scorers(args.scorer)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    if not policies:
        raise ConfigError("no policies given")
    report = run_matching_eval(pairs, fold_spec, scorer, policies)
    _write_out(emit_eval_report(report), args.out)
    return 0


def _parse_levels(raw: str) -> tuple[float, ...]:
    try:
        levels = tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"bad coverage levels {raw!r}") from None
    if not levels:
        raise ConfigError("no coverage levels given")
    return levels


def _cmd_eval_sample(args: argparse.Namespace) -> int:
    sample = load_labeled_sample(args.sample)
    curve = precision_at_coverage(sample, _parse_levels(args.coverage_levels))
    doc = {
        "levels": list(curve.levels),
        "precision_at": list(curve.precision_at),
        "thresholds_at": [None if t == COVER_ALL else t for t in curve.thresholds_at],
        "sample_size": len(sample),
    }
    _write_out(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
    return 0


def _cmd_agreement(args: argparse.Namespace) -> int:
    annotations = load_annotations(args.annotations)
    run_all = not (args.annotator_kappa or args.fleiss or args.split_consistency)
    doc: dict = {
        "pairs": len(annotations),
        "annotators": len(annotations.annotators()),
    }
    if run_all or args.fleiss:
        doc["fleiss_kappa"] = fleiss_kappa(annotations.to_matrix())
    if run_all or args.annotator_kappa:
        kappas = annotator_kappa(
            annotations, min_shared=args.min_shared, min_peers=args.min_peers
        )
        reliable = reliable_annotators(
            annotations,
            min_kappa=args.min_kappa,
            min_shared=args.min_shared,
            min_peers=args.min_peers,
        )
        doc["annotator_kappa"] = dict(sorted(kappas.items()))
        doc["reliable_annotators"] = sorted(reliable)
        doc["dropped_annotators"] = sorted(set(annotations.annotators()) - reliable)
    if run_all or args.split_consistency:
        counts = {len(annotations.judgments(p)) for p in annotations.pairs()}
        if len(counts) != 1:
            raise DataError("split consistency needs the same judgment count on every pair")
        doc["split_consistency"] = split_consistency(
            annotations, seed=args.seed, ratings_per_item=counts.pop()
        )
    _write_out(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.store, workers=args.workers)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Key point analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="run key point analysis over a comment corpus")
    analyze.add_argument("--input", required=True, help="comments file (JSON lines)")
    analyze.add_argument("--domain", choices=("arguments", "survey", "reviews"))
    analyze.add_argument("--config", help="TOML config file")
    analyze.add_argument("--scorer", help="table:<path> | lexical | remote:<url>")
    analyze.add_argument("--max-kps", type=int)
    analyze.add_argument("--policy", choices=("bm", "bm+th", "th"))
    analyze.add_argument("--threshold", type=float, help="final matching policy threshold")
    analyze.add_argument("--selection-threshold", type=float)
    analyze.add_argument("--seed", type=int)
    analyze.add_argument("--out", help="output path (default stdout)")
    analyze.add_argument(
        "--report-format", choices=("structured", "table"), default="structured"
    )
    analyze.set_defaults(func=_cmd_analyze)

    eval_match = sub.add_parser("eval-match", help="cross-validated matching evaluation")
    eval_match.add_argument("--pairs", required=True, help="labeled pairs file (CSV)")
    eval_match.add_argument("--folds", type=int, default=4)
    eval_match.add_argument("--dev-size", type=int, default=4)
    eval_match.add_argument("--scorer", required=True, help="table:<path> | lexical | remote:<url>")
    eval_match.add_argument("--policies", default="th,bm,bm+th")
    eval_match.add_argument("--seed", type=int, default=0)
    eval_match.add_argument("--out", help="output path (default stdout)")
    eval_match.set_defaults(func=_cmd_eval_match)

    eval_sample = sub.add_parser(
        "eval-sample", help="precision/coverage curve over a scored, labeled sample"
    )
    eval_sample.add_argument("--sample", required=True, help="sample file (JSON lines)")
    eval_sample.add_argument("--coverage-levels", default="0.2,0.4,0.6,0.8,1.0")
    eval_sample.add_argument("--out", help="output path (default stdout)")
    eval_sample.set_defaults(func=_cmd_eval_sample)

    agreement = sub.add_parser("agreement", help="annotation agreement statistics")
    agreement.add_argument("--annotations", required=True, help="annotations file (JSON lines)")
    agreement.add_argument("--annotator-kappa", action="store_true")
    agreement.add_argument("--min-shared", type=int, default=50)
    agreement.add_argument("--min-peers", type=int, default=5)
    agreement.add_argument("--min-kappa", type=float, default=0.1)
    agreement.add_argument("--fleiss", action="store_true")
    agreement.add_argument("--split-consistency", action="store_true")
    agreement.add_argument("--seed", type=int, default=0)
    agreement.add_argument("--out", help="output path (default stdout)")
    agreement.set_defaults(func=_cmd_agreement)

    serve = sub.add_parser("serve", help="run the analysis job service")
    serve.add_argument("--store", required=True, help="job store directory")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8400)
    serve.add_argument("--workers", type=int, default=2)
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except ScorerError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
