"""Attention-trace interchange format: records, validation, and line-delimited I/O.

A trace file is UTF-8 text with one JSON object per line, one object per
classified example. Attention weights are the final-layer rows/columns that
touch the aggregation token, stored as base-10 decimal floats serialized from
32-bit values, so write -> load reproduces every float bit-for-bit at float32
precision. Every line carries ``"format_version": 1``.

A dataset manifest is a single JSON object naming the dataset, its per-split
trace files, the average human-rationale length K, and the empirical
token-level positive rate of the training rationales.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DimensionError, ParseError, ValidationError

FORMAT_VERSION = 1

ROW_SUM_TOL = 1e-3

_TRACE_KEYS = (
    "format_version",
    "example_id",
    "dataset_id",
    "tokens",
    "cls_index",
    "word_ids",
    "num_heads",
    "attn_task_to_token",
    "attn_token_to_task",
    "label_gold",
    "label_pred",
    "rationales",
)

_SPLITS = ("train", "validation", "test")


@dataclass
class RationaleAnnotation:
    """One annotator's binary word-level importance mask."""

    annotator_id: str
    mask: list[int]


@dataclass(eq=False)
class AttentionTrace:
    """One classified example's aggregation-token attention slices plus labels.

    ``attn_task_to_token[h][j]`` is the attention the aggregation token pays to
    token j in head h (a full softmax row over the sequence).
    ``attn_token_to_task[h][j]`` is the attention token j pays to the
    aggregation token in head h (a column of the attention matrix, so it has no
    sum constraint). Both are float32 arrays of shape (num_heads, len(tokens)).
    """

    example_id: str
    dataset_id: str
    tokens: list[str]
    cls_index: int
    word_ids: list[int | None]
    num_heads: int
    attn_task_to_token: np.ndarray
    attn_token_to_task: np.ndarray
    label_gold: int
    label_pred: int
    rationales: list[RationaleAnnotation]

    def __post_init__(self) -> None:
        self.attn_task_to_token = np.asarray(self.attn_task_to_token, dtype=np.float32)
        self.attn_token_to_task = np.asarray(self.attn_token_to_task, dtype=np.float32)

    @property
    def num_tokens(self) -> int:
        return len(self.tokens)

    @property
    def num_words(self) -> int:
        """1 + highest word index; valid traces have at least one word."""
        return 1 + max(w for w in self.word_ids if w is not None)

    def candidate_indices(self) -> list[int]:
        """Token positions carrying a word id (everything a rationale can cover)."""
        return [j for j, w in enumerate(self.word_ids) if w is not None]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttentionTrace):
            return NotImplemented
        return (
            self.example_id == other.example_id
            and self.dataset_id == other.dataset_id
            and self.tokens == other.tokens
            and self.cls_index == other.cls_index
            and self.word_ids == other.word_ids
            and self.num_heads == other.num_heads
            and self.attn_task_to_token.shape == other.attn_task_to_token.shape
            and np.array_equal(self.attn_task_to_token, other.attn_task_to_token)
            and np.array_equal(self.attn_token_to_task, other.attn_token_to_task)
            and self.label_gold == other.label_gold
            and self.label_pred == other.label_pred
            and self.rationales == other.rationales
        )


@dataclass
class DatasetManifest:
    """Where one split of a dataset lives, plus its rationale statistics."""

    dataset_id: str
    split: str
    trace_path: Path
    avg_rationale_k: int
    positive_rate: float


def validate_trace(trace: AttentionTrace) -> None:
    """Check every structural and semantic invariant of a trace.

    Raises DimensionError when declared sizes disagree with array shapes, and
    ValidationError (with the invariant's name) for everything else.
    """
    eid = trace.example_id
    t = trace.num_tokens
    h = trace.num_heads

    if t < 1:
        raise DimensionError("trace has no tokens", example_id=eid)
    if h < 1:
        raise DimensionError(f"num_heads must be >= 1, got {h}", example_id=eid)
    if len(trace.word_ids) != t:
        raise DimensionError(
            f"word_ids has length {len(trace.word_ids)}, expected {t}", example_id=eid
        )
    for name, mat in (
        ("attn_task_to_token", trace.attn_task_to_token),
        ("attn_token_to_task", trace.attn_token_to_task),
    ):
        if mat.ndim != 2 or mat.shape != (h, t):
            raise DimensionError(
                f"{name} has shape {tuple(mat.shape)}, expected ({h}, {t})", example_id=eid
            )

    if not (0 <= trace.cls_index < t):
        raise ValidationError(
            "cls-index-range",
            f"cls_index {trace.cls_index} outside [0, {t})",
            example_id=eid,
        )
    if trace.word_ids[trace.cls_index] is not None:
        raise ValidationError(
            "cls-word-id",
            "the aggregation token must have a null word id",
            example_id=eid,
        )

    for name, mat in (
        ("attn_task_to_token", trace.attn_task_to_token),
        ("attn_token_to_task", trace.attn_token_to_task),
    ):
        # NaN fails both comparisons, so this also rejects non-finite entries.
        if not bool(np.all((mat >= 0.0) & (mat <= 1.0))):
            raise ValidationError(
                "attention-range",
                f"{name} has entries outside [0, 1]",
                example_id=eid,
            )

    row_sums = trace.attn_task_to_token.astype(np.float64).sum(axis=1)
    for head, s in enumerate(row_sums):
        if abs(s - 1.0) > ROW_SUM_TOL:
            raise ValidationError(
                "row-stochastic",
                f"attn_task_to_token row {head} sums to {s:.6f}, expected 1 +/- {ROW_SUM_TOL}",
                example_id=eid,
            )

    col = trace.attn_token_to_task[:, trace.cls_index]
    row = trace.attn_task_to_token[:, trace.cls_index]
    if not np.array_equal(col, row):
        raise ValidationError(
            "cls-self-attention",
            "attn_token_to_task and attn_task_to_token disagree at the aggregation token",
            example_id=eid,
        )

    present = [w for w in trace.word_ids if w is not None]
    if not present:
        raise ValidationError("no-words", "trace has no tokens with a word id", example_id=eid)
    for a, b in zip(present, present[1:]):
        if b < a:
            raise ValidationError(
                "word-id-monotone",
                f"word ids decrease ({a} then {b})",
                example_id=eid,
            )
    if set(present) != set(range(max(present) + 1)):
        raise ValidationError("word-id-gap", "gap in word indices", example_id=eid)

    n_words = max(present) + 1
    for ann in trace.rationales:
        if len(ann.mask) != n_words:
            raise ValidationError(
                "rationale-length",
                f"annotator {ann.annotator_id!r} mask has length {len(ann.mask)}, "
                f"expected {n_words}",
                example_id=eid,
            )
        if any(v not in (0, 1) for v in ann.mask):
            raise ValidationError(
                "rationale-binary",
                f"annotator {ann.annotator_id!r} mask has non-binary entries",
                example_id=eid,
            )


def _float_rows(mat: np.ndarray) -> list[list[float]]:
    # float32 -> builtin float is exact; json then emits the shortest decimal
    # that round-trips, so load(write(x)) is bit-stable.
    return [[float(v) for v in row] for row in mat]


def _trace_to_obj(trace: AttentionTrace) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "example_id": trace.example_id,
        "dataset_id": trace.dataset_id,
        "tokens": list(trace.tokens),
        "cls_index": trace.cls_index,
        "word_ids": list(trace.word_ids),
        "num_heads": trace.num_heads,
        "attn_task_to_token": _float_rows(trace.attn_task_to_token),
        "attn_token_to_task": _float_rows(trace.attn_token_to_task),
        "label_gold": trace.label_gold,
        "label_pred": trace.label_pred,
        "rationales": [
            {"annotator_id": ann.annotator_id, "mask": list(ann.mask)} for ann in trace.rationales
        ],
    }


def _require(obj: dict, key: str, path: str, line: int):
    if key not in obj:
        raise ParseError(f"missing field {key!r}", path=path, line=line)
    return obj[key]


def _obj_to_trace(obj: dict, path: str, line: int) -> AttentionTrace:
    if not isinstance(obj, dict):
        raise ParseError("record is not an object", path=path, line=line)
    unknown = set(obj) - set(_TRACE_KEYS)
    if unknown:
        raise ParseError(f"unexpected fields {sorted(unknown)}", path=path, line=line)
    version = _require(obj, "format_version", path, line)
    if version != FORMAT_VERSION:
        raise ParseError(
            f"unsupported format_version {version!r}, expected {FORMAT_VERSION}",
            path=path,
            line=line,
        )
    for key in _TRACE_KEYS:
        _require(obj, key, path, line)
    try:
        rationales = [
            RationaleAnnotation(annotator_id=str(r["annotator_id"]), mask=list(r["mask"]))
            for r in obj["rationales"]
        ]
        trace = AttentionTrace(
            example_id=str(obj["example_id"]),
            dataset_id=str(obj["dataset_id"]),
            tokens=[str(tok) for tok in obj["tokens"]],
            cls_index=int(obj["cls_index"]),
            word_ids=[None if w is None else int(w) for w in obj["word_ids"]],
            num_heads=int(obj["num_heads"]),
            attn_task_to_token=np.array(obj["attn_task_to_token"], dtype=np.float32),
            attn_token_to_task=np.array(obj["attn_token_to_task"], dtype=np.float32),
            label_gold=int(obj["label_gold"]),
            label_pred=int(obj["label_pred"]),
            rationales=rationales,
        )
    except (TypeError, KeyError, ValueError) as exc:
        raise ParseError(f"malformed record: {exc}", path=path, line=line) from exc
    return trace


def load_traces(path: str | Path) -> list[AttentionTrace]:
    """Read and validate a trace file; order follows the file."""
    path = Path(path)
    traces: list[AttentionTrace] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line=line_no) from exc
            trace = _obj_to_trace(obj, str(path), line_no)
            validate_trace(trace)
            traces.append(trace)
    return traces


def write_traces(traces: Iterable[AttentionTrace], path: str | Path) -> None:
    """Validate and write traces, one JSON object per line.

    Callers own exclusivity: one writer per path. Reads are safe to run
    concurrently with each other (all loaded records are independent).
    """
    traces = list(traces)
    for trace in traces:
        validate_trace(trace)
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(json.dumps(_trace_to_obj(trace)))
            fh.write("\n")


def filter_correct(traces: Iterable[AttentionTrace]) -> list[AttentionTrace]:
    """Keep only examples the classifier got right, preserving order."""
    return [t for t in traces if t.label_pred == t.label_gold]


def load_manifest(path: str | Path) -> list[DatasetManifest]:
    """Read a dataset manifest; one record per (split, trace file).

    Trace paths are resolved relative to the manifest's directory.
    """
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path)) from exc
    if not isinstance(obj, dict):
        raise ParseError("manifest is not an object", path=str(path))
    if obj.get("format_version") != FORMAT_VERSION:
        raise ParseError(
            f"unsupported format_version {obj.get('format_version')!r}", path=str(path)
        )
    for key in ("dataset_id", "avg_rationale_k", "positive_rate", "splits"):
        if key not in obj:
            raise ParseError(f"missing field {key!r}", path=str(path))

    k = obj["avg_rationale_k"]
    rate = obj["positive_rate"]
    if not (isinstance(k, int) and k >= 1):
        raise ValidationError("avg-rationale-k", f"avg_rationale_k must be a positive integer, got {k!r}")
    if not (isinstance(rate, (int, float)) and math.isfinite(rate) and 0.0 <= rate <= 1.0):
        raise ValidationError("positive-rate", f"positive_rate must lie in [0, 1], got {rate!r}")

    records = []
    for split, files in obj["splits"].items():
        if split not in _SPLITS:
            raise ValidationError("split-name", f"unknown split {split!r}")
        for rel in files:
            records.append(
                DatasetManifest(
                    dataset_id=str(obj["dataset_id"]),
                    split=split,
                    trace_path=(path.parent / rel).resolve(),
                    avg_rationale_k=k,
                    positive_rate=float(rate),
                )
            )
    return records


def write_manifest(
    path: str | Path,
    dataset_id: str,
    avg_rationale_k: int,
    positive_rate: float,
    splits: dict[str, list[str]],
) -> None:
    """Write a dataset manifest; ``splits`` maps split name to relative trace paths."""
    obj = {
        "format_version": FORMAT_VERSION,
        "dataset_id": dataset_id,
        "avg_rationale_k": avg_rationale_k,
        "positive_rate": positive_rate,
        "splits": splits,
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
