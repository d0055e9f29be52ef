"""Command-line interface.

Exit codes: 0 success, 1 a file failed parsing or validation, 2 runtime
errors (including unknown flags, which argparse reports with usage text).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, baseline_adapter, expnet, harness, metrics, trace as trace_mod
from .errors import ToolkitError, ValidationError, ParseError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expnet-kit",
        description="Learned attention-based token explanations: train, explain, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check trace files against every invariant")
    p.add_argument("traces", nargs="+", help="trace file(s)")

    p = sub.add_parser("train", help="train the explainer per an experiment config")
    p.add_argument("spec", help="experiment config file")
    p.add_argument("--out", help="model output path (default: <output_dir>/model.json)")
    p.add_argument("--seed", type=int, help="override every seed in the config")

    p = sub.add_parser("explain", help="score traces with a trained model")
    p.add_argument("model", help="model file")
    p.add_argument("traces", help="trace file")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", help="explanations output path (default: stdout)")

    p = sub.add_parser("binarize", help="top-K binarize a score file")
    p.add_argument("scores", help="score file")
    p.add_argument("--k", type=int, required=True, help="words to select per example")
    p.add_argument("--traces", required=True, help="trace file the scores refer to")
    p.add_argument("--out", help="explanations output path (default: stdout)")

    p = sub.add_parser("evaluate", help="run the full train/explain/evaluate pipeline")
    p.add_argument("spec", help="experiment config file")
    p.add_argument("--seed", type=int, help="override every seed in the config")

    p = sub.add_parser("report", help="re-render the table and pages for a finished run")
    p.add_argument("run_dir", help="output directory of a previous evaluate")

    p = sub.add_parser("agreement", help="annotator agreement (Krippendorff's alpha) over traces")
    p.add_argument("traces", help="trace file")

    return parser


def _apply_seed(spec: harness.ExperimentSpec, seed: int | None) -> None:
    if seed is None:
        return
    spec.training.seed = seed
    spec.bootstrap_seed = seed + 1
    spec.random_baseline_seed = seed + 2


def _cmd_validate(args) -> int:
    for path in args.traces:
        traces = trace_mod.load_traces(path)
        print(f"{path}: OK ({len(traces)} traces)")
    return 0


def _cmd_train(args) -> int:
    spec = harness.load_experiment_spec(args.spec)
    _apply_seed(spec, args.seed)
    spec.validate()
    from .features import project_labels

    labeled = []
    for dataset_id in spec.train_dataset_ids:
        records = trace_mod.load_manifest(spec.manifests[dataset_id])
        for record in records:
            if record.split != "train":
                continue
            for t in trace_mod.filter_correct(trace_mod.load_traces(record.trace_path)):
                merged = harness.merge_rationales(t, spec.merge_policy)
                labeled.extend(project_labels(t, merged.word_mask, spec.mask))
    model = expnet.train(
        labeled, spec.training, mask=spec.mask, source_dataset_ids=spec.train_dataset_ids
    )
    out = Path(args.out) if args.out else Path(spec.output_dir) / "model.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    expnet.save_model(model, out)
    print(f"model written to {out}")
    return 0


def _emit_explanations(explanations, out: str | None) -> None:
    if out is None:
        for e in explanations:
            print(
                json.dumps(
                    {
                        "format_version": trace_mod.FORMAT_VERSION,
                        "example_id": e.example_id,
                        "method_id": e.method_id,
                        "token_scores": e.token_scores,
                        "word_scores": e.word_scores,
                        "word_mask": e.word_mask,
                    }
                )
            )
    else:
        baseline_adapter.write_explanations(explanations, out)
        print(f"explanations written to {out}")


def _cmd_explain(args) -> int:
    model = expnet.load_model(args.model)
    traces = trace_mod.load_traces(args.traces)
    explanations = [expnet.predict(model, t, threshold=args.threshold) for t in traces]
    _emit_explanations(explanations, args.out)
    return 0


def _cmd_binarize(args) -> int:
    traces = trace_mod.load_traces(args.traces)
    by_id = {t.example_id: t for t in traces}
    records = baseline_adapter.load_scores(args.scores, by_id)
    explanations = [
        baseline_adapter.explanation_from_scores(by_id[r.example_id], r, args.k)
        for r in records
    ]
    _emit_explanations(explanations, args.out)
    return 0


def _cmd_evaluate(args) -> int:
    spec = harness.load_experiment_spec(args.spec)
    _apply_seed(spec, args.seed)
    reports = harness.run_experiment(spec)
    for r in reports:
        half = (r.f1_ci_high - r.f1_ci_low) / 2.0
        auroc = "n/a" if r.auroc is None else f"{r.auroc:.3f}"
        print(
            f"{r.method_id:>12s}  F1 {r.f1:.3f} ± {half:.3f}  "
            f"P {r.precision:.3f}  R {r.recall:.3f}  AUROC {auroc}"
        )
    print(f"run written to {spec.output_dir}")
    return 0


def _cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    manifest = harness.load_run_manifest(run_dir / "manifest.json")
    traces = []
    for path in manifest["test_trace_paths"]:
        traces.extend(trace_mod.load_traces(path))
    traces = trace_mod.filter_correct(traces)
    reports = []
    explanations = {}
    for method in manifest["methods"]:
        reports.append(harness.load_report(run_dir / "reports" / f"{method}.json"))
        loaded = baseline_adapter.load_explanations(
            run_dir / "explanations" / f"{method}.jsonl"
        )
        explanations[method] = {e.example_id: e for e in loaded}
    from .reporting import render_report

    render_report(reports, traces, explanations, run_dir, merge_policy=manifest["merge_policy"])
    print(f"report rendered under {run_dir}")
    return 0


def _cmd_agreement(args) -> int:
    traces = trace_mod.load_traces(args.traces)
    annotator_ids = sorted({ann.annotator_id for t in traces for ann in t.rationales})
    if not annotator_ids:
        raise ValidationError("no-annotators", "traces carry no rationale annotations")
    rows: dict[str, list] = {a: [] for a in annotator_ids}
    for t in traces:
        masks = {ann.annotator_id: ann.mask for ann in t.rationales}
        for a in annotator_ids:
            mask = masks.get(a)
            if mask is None:
                rows[a].extend([None] * t.num_words)
            else:
                rows[a].extend(mask)
    alpha = metrics.krippendorff_alpha([rows[a] for a in annotator_ids])
    print(f"annotators: {len(annotator_ids)}")
    print(f"krippendorff_alpha: {alpha:.6f}")
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "train": _cmd_train,
    "explain": _cmd_explain,
    "binarize": _cmd_binarize,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
    "agreement": _cmd_agreement,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
