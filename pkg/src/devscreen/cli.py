"""Command-line interface.

One subcommand per pipeline stage: ingest, featurize, train, classify,
eval, cv, baseline, report, triage {prepare, serve, export}, synth.
Machine-readable outputs go to files (written atomically) or stdout;
diagnostics go to stderr; exit codes are 0 (ok), 1 (operational
failure), 2 (usage).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import corpus, evaluate, features, labels, synth, tree, triage
from .server import ServerError, serve_triage

SCHEMA_ENV = "DEVSCREEN_SCHEMA"

_ERRORS = (corpus.CorpusError, features.SchemaError, tree.TreeError,
           evaluate.EvalError, triage.TriageError, labels.LabelStoreError,
           ServerError, OSError, ValueError)


def _write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _load_schema(args) -> features.FeatureSchema:
    path = getattr(args, "schema", None) or os.environ.get(SCHEMA_ENV) or None
    return features.load_lexicon(path)


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _fractions(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fraction list {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


# ---------------------------------------------------------------------------
# Subcommand implementations


def _cmd_ingest(args) -> int:
    cmap = corpus.ColumnMap.load(args.column_map) if args.column_map else None
    ds = corpus.parse_projects(args.infile, format=args.format, column_map=cmap,
                               provenance=str(args.infile))
    cfg = corpus.FilterConfig(
        drop_forks=not args.keep_forks,
        drop_removed=not args.keep_removed,
        drop_non_english=args.drop_non_english,
        english_ascii_letter_ratio=args.english_ratio,
        removed_require_missing=cmap.removed_require_missing if cmap else ("description", "language"),
        removed_require_zero=cmap.removed_require_zero if cmap else corpus.COUNT_FIELDS,
    )
    kept, report = corpus.apply_filters(ds, cfg)
    merged_warnings: list[str] = []
    applied = 0
    if args.labels:
        kept, merge_report = corpus.merge_labels(kept, args.labels)
        applied = merge_report.applied
        merged_warnings = list(merge_report.warnings)
    _write_atomic(args.out, corpus.serialize_dataset(kept))
    for warning in merged_warnings:
        print(f"warning: {warning}", file=sys.stderr)
    _print_json({
        "read": len(ds),
        "kept": len(kept),
        "excluded": report.as_dict(),
        "labels_applied": applied,
        "label_warnings": len(merged_warnings),
        "out": str(args.out),
    })
    return 0


def _cmd_featurize(args) -> int:
    schema = _load_schema(args)
    ds = corpus.load_dataset(args.infile)
    matrix, labels_ = features.featurize_dataset(ds, schema)
    names = schema.feature_names()
    lines = ["project_id," + ",".join(names) + ",label"]
    for rec, fv in zip(ds, matrix):
        values = fv.as_dict()
        label = "" if rec.label is None else ("TRUE" if rec.label else "FALSE")
        lines.append(rec.project_id + "," + ",".join(str(values[n]) for n in names)
                     + "," + label)
    _write_atomic(args.out, "\n".join(lines) + "\n")
    _print_json({"records": len(ds), "features": len(names),
                 "schema_fingerprint": schema.fingerprint(), "out": str(args.out)})
    return 0


def _train_params(args) -> tree.TrainParams:
    return tree.TrainParams(confidence_factor=args.cf, min_leaf=args.min_leaf,
                            max_depth=args.max_depth)


def _labeled_inputs(args, schema):
    ds = corpus.load_dataset(args.infile)
    matrix, labels_ = features.featurize_dataset(ds, schema)
    for rec in ds:
        if rec.label is None:
            raise evaluate.EvalError(f"record {rec.project_id} has no label")
    return ds, matrix, [bool(l) for l in labels_]


def _cmd_train(args) -> int:
    schema = _load_schema(args)
    _, matrix, y = _labeled_inputs(args, schema)
    model = tree.train(matrix, y, _train_params(args))
    _write_atomic(args.out, tree.save_tree(model).decode("utf-8"))
    if args.text:
        print(tree.render_text(model), end="")
    else:
        _print_json({"nodes": model.node_count(), "leaves": model.leaf_count(),
                     "cf": args.cf, "min_leaf": args.min_leaf,
                     "max_depth": args.max_depth,
                     "schema_fingerprint": model.schema_fingerprint,
                     "out": str(args.out)})
    return 0


def _cmd_classify(args) -> int:
    schema = _load_schema(args)
    model = tree.resolve_model(args.model)
    ds = corpus.load_dataset(args.infile)
    matrix, _ = features.featurize_dataset(ds, schema)
    lines = ["project_id,predicted,leaf_id,confidence"]
    for rec, fv in zip(ds, matrix):
        got = tree.classify(model, fv)
        predicted = "TRUE" if got.klass else "FALSE"
        lines.append(f"{rec.project_id},{predicted},{got.leaf_id},{got.confidence:.6f}")
    _write_atomic(args.out, "\n".join(lines) + "\n")
    _print_json({"records": len(ds), "out": str(args.out)})
    return 0


def _cmd_eval(args) -> int:
    schema = _load_schema(args)
    model = tree.resolve_model(args.model)
    _, matrix, y = _labeled_inputs(args, schema)
    report = evaluate.evaluate_tree(model, matrix, y,
                                    strategy_descriptor=f"eval({args.model})")
    if args.out:
        _write_atomic(args.out, evaluate.reports_to_csv([report]))
    if args.figures:
        from . import plots
        plots.save_metric_bars([report], Path(args.figures) / "eval_metrics.png")
    print(evaluate.render_eval(report), end="")
    return 0


def _cmd_cv(args) -> int:
    schema = _load_schema(args)
    _, matrix, y = _labeled_inputs(args, schema)
    report = evaluate.cross_validate(matrix, y, k=args.k, params=_train_params(args),
                                     seed=args.seed)
    if args.out:
        rows = list(report.per_fold) + [report.pooled]
        _write_atomic(args.out, evaluate.reports_to_csv(rows))
    if args.figures:
        from . import plots
        plots.save_cv_folds(report, Path(args.figures) / "cv_folds.png")
    print(evaluate.render_cv(report), end="")
    return 0


def _cmd_baseline(args) -> int:
    ds = corpus.load_dataset(args.infile)
    run = evaluate.baseline_top if args.strategy == "top" else evaluate.baseline_bottom
    reports = [run(ds, args.dimension, fraction) for fraction in args.fraction]
    if args.out:
        _write_atomic(args.out, evaluate.reports_to_csv(reports))
    if args.figures:
        from . import plots
        fig_dir = Path(args.figures)
        if len(reports) > 1:
            plots.save_baseline_curve(reports, args.fraction,
                                      fig_dir / f"baseline_{args.strategy}_{args.dimension}.png")
        else:
            plots.save_metric_bars(reports,
                                   fig_dir / f"baseline_{args.strategy}_{args.dimension}.png")
    for report in reports:
        print(evaluate.render_eval(report), end="")
    return 0


def _cmd_report(args) -> int:
    schema = _load_schema(args)
    model = tree.resolve_model(args.model)
    ds, matrix, y = _labeled_inputs(args, schema)
    cfg = evaluate.RefineConfig(misclassification_threshold=args.threshold,
                                top_ngrams=args.top_ngrams)
    report = evaluate.misclassification_report(model, matrix, y, ds, cfg, schema)
    if args.out:
        lines = ["project_id,predicted,truth,leaf_id,description"]
        for item in report.items:
            desc = (item.description or "").replace('"', '""')
            predicted = "TRUE" if item.predicted else "FALSE"
            truth = "TRUE" if item.truth else "FALSE"
            lines.append(f'{item.project_id},{predicted},{truth},{item.leaf_id},"{desc}"')
        _write_atomic(args.out, "\n".join(lines) + "\n")
    if args.figures:
        from . import plots
        stats = triage.leaf_statistics(model, matrix, y)
        plots.save_leaf_errors(stats, Path(args.figures) / "leaf_errors.png")
    _print_json({
        "misclassified": len(report.items),
        "n_total": report.n_total,
        "fraction": round(report.fraction, 6),
        "threshold": report.threshold,
        "threshold_exceeded": report.threshold_exceeded,
        "candidate_strings": list(report.candidate_strings),
    })
    return 0


def _cmd_triage_prepare(args) -> int:
    schema = _load_schema(args)
    model = tree.resolve_model(args.model)
    ds, matrix, y = _labeled_inputs(args, schema)
    stats = triage.leaf_statistics(model, matrix, y)
    if args.leaves is not None:
        flag_set = triage.select_flag_leaves(stats, n_total=len(matrix), leaf_ids=args.leaves)
    else:
        flag_set = triage.select_flag_leaves(stats, coverage_target=args.coverage,
                                             effort_budget=args.effort_budget,
                                             n_total=len(matrix))
    criteria = Path(args.criteria).read_text(encoding="utf-8") if args.criteria else None
    session = triage.create_session(model, flag_set, ds, matrix, criteria_text=criteria)
    triage.save_session(session, args.session)
    if args.figures:
        from . import plots
        plots.save_leaf_errors(stats, Path(args.figures) / "leaf_errors.png")
    if flag_set.diagnostic:
        print(f"warning: {flag_set.diagnostic}", file=sys.stderr)
    _print_json({
        "session_id": session.session_id,
        "session_dir": str(args.session),
        "flagged_leaves": sorted(flag_set.flagged_leaf_ids),
        "queued": len(session.queue),
        "auto": len(session.auto),
        "effort": round(flag_set.effort, 6),
        "coverage": round(flag_set.coverage, 6),
    })
    return 0


def _cmd_triage_serve(args) -> int:
    session = triage.load_session(args.session)
    handle = serve_triage(session, bind=args.bind, ui_dir=args.ui, block=False,
                          quiet=not args.verbose)
    host, port = handle.address
    print(f"serving triage session {session.session_id} on http://{host}:{port}",
          file=sys.stderr)
    try:
        handle.wait()
    except KeyboardInterrupt:
        print("shutting down", file=sys.stderr)
    finally:
        handle.shutdown()
    return 0


def _cmd_triage_export(args) -> int:
    session = triage.load_session(args.session)
    text = triage.export_labels(session)
    if args.out:
        _write_atomic(args.out, text)
        _print_json({"decisions": len(session.decisions), "out": str(args.out)})
    else:
        print(text, end="")
    return 0


def _cmd_synth(args) -> int:
    schema = _load_schema(args)
    generator = tree.resolve_model(args.model) if args.model else None
    spec = synth.SynthSpec(n_records=args.n, generator_tree=generator,
                           label_noise=args.noise, seed=args.seed)
    ds = synth.generate_synthetic_corpus(spec, schema)
    _write_atomic(args.out, corpus.serialize_dataset(ds))
    n_true = sum(1 for rec in ds if rec.label)
    _print_json({"records": len(ds), "true_fraction": round(n_true / len(ds), 6),
                 "seed": args.seed, "noise": args.noise, "out": str(args.out)})
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="devscreen",
        description="Screen repository records for public development projects "
                    "with keyword features and decision trees.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_schema(p):
        p.add_argument("--schema", default=None,
                       help=f"lexicon JSON path (default: ${SCHEMA_ENV} or built-in)")

    def add_params(p):
        p.add_argument("--cf", type=float, default=0.25, help="pruning confidence factor")
        p.add_argument("--min-leaf", type=int, default=2, help="minimum records per leaf")
        p.add_argument("--max-depth", type=int, default=None, help="depth cap (default none)")

    p = sub.add_parser("ingest", help="parse, filter, and optionally label raw records")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=("csv", "ndjson"), default="csv")
    p.add_argument("--column-map", default=None, help="JSON column-map file")
    p.add_argument("--labels", default=None, help="label store to merge")
    p.add_argument("--keep-forks", action="store_true")
    p.add_argument("--keep-removed", action="store_true")
    p.add_argument("--drop-non-english", action="store_true")
    p.add_argument("--english-ratio", type=float, default=0.8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("featurize", help="extract the feature matrix to CSV")
    p.add_argument("--in", dest="infile", required=True)
    add_schema(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="fit and prune a decision tree")
    p.add_argument("--in", dest="infile", required=True)
    add_schema(p)
    add_params(p)
    p.add_argument("--out", required=True)
    p.add_argument("--text", action="store_true", help="print the tree instead of a summary")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("classify", help="predict classes for records")
    p.add_argument("--model", default="fig4", help="builtin name or model file")
    p.add_argument("--in", dest="infile", required=True)
    add_schema(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("eval", help="score a model against labels")
    p.add_argument("--model", default="fig4")
    p.add_argument("--in", dest="infile", required=True)
    add_schema(p)
    p.add_argument("--out", default=None, help="write a CSV report row")
    p.add_argument("--figures", default=None, help="directory for PNG figures")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("cv", help="stratified k-fold cross-validation")
    p.add_argument("--in", dest="infile", required=True)
    add_schema(p)
    add_params(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--figures", default=None)
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("baseline", help="count-threshold baseline strategies")
    p.add_argument("--strategy", choices=("top", "bottom"), required=True)
    p.add_argument("--dimension", choices=evaluate.DIMENSIONS, required=True)
    p.add_argument("--fraction", type=_fractions, required=True,
                   help="fraction or comma-separated list")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--figures", default=None)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("report", help="misclassification and keyword-candidate report")
    p.add_argument("--model", default="fig4")
    p.add_argument("--in", dest="infile", required=True)
    add_schema(p)
    p.add_argument("--threshold", type=float, default=0.15)
    p.add_argument("--top-ngrams", type=int, default=30)
    p.add_argument("--out", default=None, help="CSV of misclassified records")
    p.add_argument("--figures", default=None)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("triage", help="human review workflow")
    tsub = p.add_subparsers(dest="triage_command", required=True)

    tp = tsub.add_parser("prepare", help="build a review session directory")
    tp.add_argument("--model", default="fig4")
    tp.add_argument("--in", dest="infile", required=True)
    add_schema(tp)
    tp.add_argument("--session", required=True, help="session directory to create")
    tp.add_argument("--coverage", type=float, default=0.9)
    tp.add_argument("--effort-budget", type=float, default=0.5)
    tp.add_argument("--leaves", type=_int_list, default=None,
                    help="explicit leaf ids, comma-separated (overrides greedy selection)")
    tp.add_argument("--criteria", default=None, help="file with reviewer guidance text")
    tp.add_argument("--figures", default=None)
    tp.set_defaults(func=_cmd_triage_prepare)

    ts = tsub.add_parser("serve", help="serve the review API and UI")
    ts.add_argument("--session", required=True)
    ts.add_argument("--bind", default="127.0.0.1:8765")
    ts.add_argument("--ui", default=None, help="directory with the static UI bundle")
    ts.add_argument("--verbose", action="store_true")
    ts.set_defaults(func=_cmd_triage_serve)

    te = tsub.add_parser("export", help="dump current decisions as label records")
    te.add_argument("--session", required=True)
    te.add_argument("--out", default=None)
    te.set_defaults(func=_cmd_triage_export)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--model", default=None, help="generator tree (default: built-in)")
    add_schema(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
