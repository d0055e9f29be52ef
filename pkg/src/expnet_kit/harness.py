"""Experiment orchestration: cross-task runs from a single config file.

A run trains the explainer on the pooled, correct-prediction-filtered
rationale data of the training datasets, then evaluates it (and any number of
score-file methods plus the random baseline) on the held-out test dataset.
Test-set information never reaches training; the one sanctioned exception is
the test dataset's average rationale length K, which parameterizes top-K
binarization of baseline scores at evaluation time.

Every random decision is seeded from the config, and all outputs (model file,
reports, explanations, rendered pages) are byte-deterministic given the same
config and input files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Mapping, Sequence

from . import baseline_adapter, expnet, features, metrics, trace as trace_mod
from .baseline_adapter import Explanation
from .errors import ExperimentSpecError, ParseError, UndefinedMetricError, ValidationError
from .expnet import TrainingConfig
from .features import FeatureMask
from .metrics import ConfusionCounts, EvalReport
from .trace import FORMAT_VERSION, AttentionTrace, DatasetManifest

MERGE_POLICIES = ("majority", "union")


@dataclass
class MergedRationale:
    """A single gold word mask for one example, after annotator merging."""

    example_id: str
    word_mask: list[int]
    policy: str


@dataclass
class ExperimentSpec:
    train_dataset_ids: list[str]
    test_dataset_id: str
    manifests: dict[str, Path]
    methods: list[str]
    output_dir: Path
    score_files: dict[str, Path] = field(default_factory=dict)
    mask: FeatureMask = FeatureMask.FULL
    merge_policy: str = "majority"
    training: TrainingConfig = field(default_factory=TrainingConfig)
    bootstrap_iterations: int = 1000
    bootstrap_seed: int = 0
    random_baseline_seed: int = 0

    def validate(self) -> None:
        if not self.train_dataset_ids:
            raise ExperimentSpecError("no training datasets")
        if self.test_dataset_id in self.train_dataset_ids:
            raise ExperimentSpecError(
                f"test dataset {self.test_dataset_id!r} appears in the training datasets"
            )
        if len(set(self.train_dataset_ids)) != len(self.train_dataset_ids):
            raise ExperimentSpecError("duplicate training dataset ids")
        for dataset_id in [*self.train_dataset_ids, self.test_dataset_id]:
            if dataset_id not in self.manifests:
                raise ExperimentSpecError(f"no manifest for dataset {dataset_id!r}")
            path = Path(self.manifests[dataset_id])
            if not path.is_file():
                raise ExperimentSpecError(f"manifest for {dataset_id!r} not found: {path}")
        if not self.methods:
            raise ExperimentSpecError("no methods to evaluate")
        _parse_policy(self.merge_policy)
        for method in self.methods:
            if method in (expnet.EXPNET_METHOD_ID, baseline_adapter.RANDOM_METHOD_ID):
                continue
            if method not in self.score_files:
                raise ExperimentSpecError(f"method {method!r} has no score file")
            if not Path(self.score_files[method]).is_file():
                raise ExperimentSpecError(
                    f"score file for {method!r} not found: {self.score_files[method]}"
                )
        self.training.validate()
        if self.bootstrap_iterations < 1:
            raise ExperimentSpecError("bootstrap_iterations must be >= 1")


def load_experiment_spec(path: str | Path) -> ExperimentSpec:
    """Read an experiment config; relative paths resolve against its directory."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path)) from exc
    if obj.get("format_version") != FORMAT_VERSION:
        raise ParseError(
            f"unsupported format_version {obj.get('format_version')!r}", path=str(path)
        )
    base = path.parent

    def respath(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else (base / q).resolve()

    try:
        training = TrainingConfig(**obj.get("training", {}))
        spec = ExperimentSpec(
            train_dataset_ids=[str(d) for d in obj["train_dataset_ids"]],
            test_dataset_id=str(obj["test_dataset_id"]),
            manifests={k: respath(v) for k, v in obj["manifests"].items()},
            methods=[str(m) for m in obj["methods"]],
            output_dir=respath(obj["output_dir"]),
            score_files={k: respath(v) for k, v in obj.get("score_files", {}).items()},
            mask=FeatureMask(obj.get("mask", "full")),
            merge_policy=str(obj.get("merge_policy", "majority")),
            training=training,
            bootstrap_iterations=int(obj.get("bootstrap_iterations", 1000)),
            bootstrap_seed=int(obj.get("bootstrap_seed", 0)),
            random_baseline_seed=int(obj.get("random_baseline_seed", 0)),
        )
    except (TypeError, KeyError, ValueError) as exc:
        raise ParseError(f"malformed experiment config: {exc}", path=str(path)) from exc
    return spec


def _parse_policy(policy: str) -> tuple[str, str | None]:
    if policy in MERGE_POLICIES:
        return policy, None
    if policy.startswith("single:") and len(policy) > len("single:"):
        return "single", policy.split(":", 1)[1]
    raise ExperimentSpecError(
        f"unknown merge policy {policy!r}; use 'majority', 'union', or 'single:<annotator_id>'"
    )


def merge_rationales(trace: AttentionTrace, policy: str = "majority") -> MergedRationale:
    """Collapse the trace's annotators into one binary word mask.

    majority: a word is positive iff strictly more than half the annotators
    marked it (an even split is negative). union: any annotator suffices.
    single:<id>: that annotator's mask verbatim.
    """
    if not trace.rationales:
        raise ValidationError(
            "no-annotators", "cannot merge rationales without annotators",
            example_id=trace.example_id,
        )
    kind, annotator = _parse_policy(policy)
    n_words = trace.num_words
    if kind == "single":
        for ann in trace.rationales:
            if ann.annotator_id == annotator:
                return MergedRationale(trace.example_id, list(ann.mask), policy)
        raise ValidationError(
            "annotator-id", f"annotator {annotator!r} not present",
            example_id=trace.example_id,
        )
    votes = [0] * n_words
    for ann in trace.rationales:
        for w, bit in enumerate(ann.mask):
            votes[w] += bit
    if kind == "union":
        mask = [1 if v > 0 else 0 for v in votes]
    else:
        half = len(trace.rationales) / 2.0
        mask = [1 if v > half else 0 for v in votes]
    return MergedRationale(trace.example_id, mask, policy)


def _manifest_for(spec: ExperimentSpec, dataset_id: str) -> list[DatasetManifest]:
    return trace_mod.load_manifest(spec.manifests[dataset_id])


def _load_split(records: Sequence[DatasetManifest], split: str, dataset_id: str) -> list[AttentionTrace]:
    paths = [r.trace_path for r in records if r.split == split]
    if not paths:
        raise ExperimentSpecError(f"dataset {dataset_id!r} has no {split!r} split")
    traces: list[AttentionTrace] = []
    for p in paths:
        traces.extend(trace_mod.load_traces(p))
    return traces


def run_experiment(spec: ExperimentSpec) -> list[EvalReport]:
    """Execute the full train -> explain -> evaluate pipeline and write the run tree.

    Output layout under spec.output_dir:
      manifest.json            every seed, policy, and statistic the run used
      model.json               the trained explainer
      reports/<method>.json    one EvalReport per method
      reports/results_table.*  the methods-by-dataset score table
      explanations/<m>.jsonl   per-example explanations per method
      html/                    static token-highlight pages
    """
    spec.validate()

    train_traces: list[AttentionTrace] = []
    for dataset_id in spec.train_dataset_ids:
        records = _manifest_for(spec, dataset_id)
        train_traces.extend(_load_split(records, "train", dataset_id))
    n_train_loaded = len(train_traces)
    train_correct = trace_mod.filter_correct(train_traces)
    if not train_correct:
        raise ExperimentSpecError("no correctly-predicted training examples")

    labeled: list[features.LabeledToken] = []
    for t in train_correct:
        merged = merge_rationales(t, spec.merge_policy)
        labeled.extend(features.project_labels(t, merged.word_mask, spec.mask))
    positive_rate = features.compute_positive_rate(labeled)

    model = expnet.train(
        labeled,
        spec.training,
        mask=spec.mask,
        source_dataset_ids=spec.train_dataset_ids,
    )
    if spec.test_dataset_id in model.train_meta.source_dataset_ids:
        raise ExperimentSpecError("test dataset leaked into training provenance")

    test_records = _manifest_for(spec, spec.test_dataset_id)
    k_test = test_records[0].avg_rationale_k
    test_traces = _load_split(test_records, "test", spec.test_dataset_id)
    n_test_loaded = len(test_traces)
    test_correct = trace_mod.filter_correct(test_traces)
    if not test_correct:
        raise ExperimentSpecError("no correctly-predicted test examples")
    gold = {t.example_id: merge_rationales(t, spec.merge_policy) for t in test_correct}

    explanations: dict[str, dict[str, Explanation]] = {}
    for method in spec.methods:
        by_example: dict[str, Explanation] = {}
        if method == expnet.EXPNET_METHOD_ID:
            for t in test_correct:
                by_example[t.example_id] = expnet.predict(
                    model, t, threshold=spec.training.threshold
                )
        elif method == baseline_adapter.RANDOM_METHOD_ID:
            for t in test_correct:
                by_example[t.example_id] = baseline_adapter.random_baseline(
                    t, positive_rate, seed=spec.random_baseline_seed
                )
        else:
            records = baseline_adapter.load_scores(
                spec.score_files[method], {t.example_id: t for t in test_traces}
            )
            by_id = {t.example_id: t for t in test_correct}
            for record in records:
                t = by_id.get(record.example_id)
                if t is None:
                    continue  # scored but filtered out (misclassified example)
                by_example[t.example_id] = baseline_adapter.explanation_from_scores(
                    t, record, k_test
                )
        explanations[method] = by_example

    reports: list[EvalReport] = []
    for method in spec.methods:
        reports.append(
            _evaluate_method(
                method,
                spec.test_dataset_id,
                test_correct,
                gold,
                explanations[method],
                iterations=spec.bootstrap_iterations,
                seed=spec.bootstrap_seed,
            )
        )

    out = Path(spec.output_dir)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    (out / "explanations").mkdir(exist_ok=True)
    expnet.save_model(model, out / "model.json")
    for method, report in zip(spec.methods, reports):
        write_report(report, out / "reports" / f"{method}.json")
        baseline_adapter.write_explanations(
            [explanations[method][eid] for eid in sorted(explanations[method])],
            out / "explanations" / f"{method}.jsonl",
        )
    _write_run_manifest(
        out / "manifest.json",
        spec,
        positive_rate_train=positive_rate,
        k_test=k_test,
        n_train_loaded=n_train_loaded,
        n_train_correct=len(train_correct),
        n_test_loaded=n_test_loaded,
        n_test_correct=len(test_correct),
        test_trace_paths=[str(r.trace_path) for r in test_records if r.split == "test"],
    )
    from .reporting import render_report

    render_report(reports, test_correct, explanations, out, merge_policy=spec.merge_policy)
    return reports


def _evaluate_method(
    method: str,
    dataset_id: str,
    test_correct: Sequence[AttentionTrace],
    gold: Mapping[str, MergedRationale],
    by_example: Mapping[str, Explanation],
    iterations: int,
    seed: int,
) -> EvalReport:
    counts: list[ConfusionCounts] = []
    per_example: list[dict] = []
    pooled: list[tuple[float, int]] = []
    n_words = 0
    covered = [t for t in test_correct if t.example_id in by_example]
    if len(covered) < 2:
        raise ExperimentSpecError(
            f"method {method!r} covers {len(covered)} evaluated examples; need at least 2"
        )
    for t in covered:
        expl = by_example[t.example_id]
        gold_mask = gold[t.example_id].word_mask
        c = metrics.accumulate(expl.word_mask, gold_mask)
        counts.append(c)
        per_example.append(
            {"example_id": t.example_id, "tp": c.tp, "fp": c.fp, "fn": c.fn}
        )
        pooled.extend(zip((float(s) for s in expl.word_scores), gold_mask))
        n_words += len(gold_mask)

    precision, recall, f1 = metrics.dataset_f1(counts)
    ci_low, ci_high = metrics.bootstrap_ci(counts, iterations=iterations, seed=seed)
    try:
        auroc = metrics.pooled_auroc(pooled)
    except UndefinedMetricError:
        auroc = None
    try:
        aupr = metrics.pooled_aupr(pooled)
    except UndefinedMetricError:
        aupr = None
    return EvalReport(
        method_id=method,
        dataset_id=dataset_id,
        precision=precision,
        recall=recall,
        f1=f1,
        f1_ci_low=min(ci_low, f1),
        f1_ci_high=max(ci_high, f1),
        auroc=auroc,
        aupr=aupr,
        n_examples=len(covered),
        n_words=n_words,
        per_example=per_example,
    )


def write_report(report: EvalReport, path: str | Path) -> None:
    obj = {"format_version": FORMAT_VERSION, **asdict(report)}
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def load_report(path: str | Path) -> EvalReport:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path)) from exc
    if obj.pop("format_version", None) != FORMAT_VERSION:
        raise ParseError("unsupported format_version", path=str(path))
    try:
        return EvalReport(**obj)
    except TypeError as exc:
        raise ParseError(f"malformed report: {exc}", path=str(path)) from exc


def _write_run_manifest(path: Path, spec: ExperimentSpec, **extra) -> None:
    from . import __version__

    obj = {
        "format_version": FORMAT_VERSION,
        "toolkit_version": __version__,
        "train_dataset_ids": spec.train_dataset_ids,
        "test_dataset_id": spec.test_dataset_id,
        "manifests": {k: str(v) for k, v in spec.manifests.items()},
        "methods": spec.methods,
        "score_files": {k: str(v) for k, v in spec.score_files.items()},
        "mask": spec.mask.value,
        "merge_policy": spec.merge_policy,
        "training": asdict(spec.training),
        "bootstrap_iterations": spec.bootstrap_iterations,
        "bootstrap_seed": spec.bootstrap_seed,
        "random_baseline_seed": spec.random_baseline_seed,
        **extra,
    }
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def load_run_manifest(path: str | Path) -> dict:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path)) from exc
    if obj.get("format_version") != FORMAT_VERSION:
        raise ParseError("unsupported format_version", path=str(path))
    return obj
