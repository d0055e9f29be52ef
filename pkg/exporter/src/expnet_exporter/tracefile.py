"""Writer for the attention-trace interchange format.

This module produces the exact on-disk format the expnet-kit toolkit
consumes: UTF-8, one JSON object per line carrying ``format_version: 1``,
attention matrices as nested [H][T] arrays of decimal floats serialized from
float32 values. The toolkit's own ``expnet-kit validate`` is the contract
check; ``check_record`` below enforces the same invariants locally so that
malformed records never leave this process.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

FORMAT_VERSION = 1
ROW_SUM_TOL = 1e-3


class ExportError(Exception):
    """A record could not be exported (misalignment, bad shapes, bad values)."""


@dataclass
class TraceRecord:
    example_id: str
    dataset_id: str
    tokens: list[str]
    cls_index: int
    word_ids: list[int | None]
    num_heads: int
    attn_task_to_token: np.ndarray  # (H, T) float32
    attn_token_to_task: np.ndarray  # (H, T) float32
    label_gold: int
    label_pred: int
    rationales: list[dict] = field(default_factory=list)  # {"annotator_id", "mask"}

    @property
    def num_words(self) -> int:
        return 1 + max(w for w in self.word_ids if w is not None)


def check_record(rec: TraceRecord) -> None:
    """Raise ExportError unless the record satisfies every format invariant."""
    t = len(rec.tokens)
    eid = rec.example_id
    task = np.asarray(rec.attn_task_to_token, dtype=np.float32)
    tok = np.asarray(rec.attn_token_to_task, dtype=np.float32)
    if task.shape != (rec.num_heads, t) or tok.shape != (rec.num_heads, t):
        raise ExportError(f"{eid}: attention shapes {task.shape}/{tok.shape} != ({rec.num_heads}, {t})")
    if len(rec.word_ids) != t:
        raise ExportError(f"{eid}: word_ids length {len(rec.word_ids)} != {t}")
    if not (0 <= rec.cls_index < t) or rec.word_ids[rec.cls_index] is not None:
        raise ExportError(f"{eid}: bad aggregation-token position {rec.cls_index}")
    for name, mat in (("task_to_token", task), ("token_to_task", tok)):
        if not bool(np.all((mat >= 0.0) & (mat <= 1.0))):
            raise ExportError(f"{eid}: {name} attention outside [0, 1]")
    sums = task.astype(np.float64).sum(axis=1)
    if np.max(np.abs(sums - 1.0)) > ROW_SUM_TOL:
        raise ExportError(f"{eid}: task_to_token rows not row-stochastic (sums {sums})")
    if not np.array_equal(tok[:, rec.cls_index], task[:, rec.cls_index]):
        raise ExportError(f"{eid}: aggregation-token self-attention mismatch")
    present = [w for w in rec.word_ids if w is not None]
    if not present:
        raise ExportError(f"{eid}: no tokens carry a word id")
    if any(b < a for a, b in zip(present, present[1:])):
        raise ExportError(f"{eid}: word ids not monotone")
    if set(present) != set(range(max(present) + 1)):
        raise ExportError(f"{eid}: gap in word indices")
    n_words = max(present) + 1
    for ann in rec.rationales:
        mask = ann["mask"]
        if len(mask) != n_words:
            raise ExportError(
                f"{eid}: rationale of {ann['annotator_id']!r} has {len(mask)} entries "
                f"for {n_words} words"
            )
        if any(v not in (0, 1) for v in mask):
            raise ExportError(f"{eid}: rationale of {ann['annotator_id']!r} is not binary")


def _rows(mat: np.ndarray) -> list[list[float]]:
    # float32 -> builtin float is exact, json emits the shortest round-trip
    # decimal, so the toolkit reads back identical float32 bits
    return [[float(v) for v in row] for row in np.asarray(mat, dtype=np.float32)]


def write_records(records: Iterable[TraceRecord], path: str | Path) -> int:
    """Validate and write records; returns the number written."""
    path = Path(path)
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            check_record(rec)
            obj = {
                "format_version": FORMAT_VERSION,
                "example_id": rec.example_id,
                "dataset_id": rec.dataset_id,
                "tokens": list(rec.tokens),
                "cls_index": rec.cls_index,
                "word_ids": list(rec.word_ids),
                "num_heads": rec.num_heads,
                "attn_task_to_token": _rows(rec.attn_task_to_token),
                "attn_token_to_task": _rows(rec.attn_token_to_task),
                "label_gold": rec.label_gold,
                "label_pred": rec.label_pred,
                "rationales": [
                    {"annotator_id": a["annotator_id"], "mask": list(a["mask"])}
                    for a in rec.rationales
                ],
            }
            fh.write(json.dumps(obj))
            fh.write("\n")
            count += 1
    return count


def read_records(path: str | Path) -> list[dict]:
    """Read raw trace objects back (for manifest statistics)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out


def _majority_mask(obj: dict) -> list[int]:
    n_words = 1 + max(w for w in obj["word_ids"] if w is not None)
    votes = [0] * n_words
    for ann in obj["rationales"]:
        for w, bit in enumerate(ann["mask"]):
            votes[w] += bit
    half = len(obj["rationales"]) / 2.0
    return [1 if v > half else 0 for v in votes]


def write_manifest_from_traces(
    out_path: str | Path,
    dataset_id: str,
    splits: dict[str, list[str]],
    stats_split: str = "train",
) -> dict:
    """Assemble a dataset manifest, computing K and the positive rate.

    K is the average count of majority-merged important words per example of
    the ``stats_split`` files; the positive rate is the token-level positive
    fraction of the same rationales. Paths in ``splits`` are relative to the
    manifest's directory.
    """
    out_path = Path(out_path)
    ks: list[int] = []
    pos = total = 0
    for rel in splits[stats_split]:
        for obj in read_records(out_path.parent / rel):
            if not obj["rationales"]:
                continue
            merged = _majority_mask(obj)
            ks.append(sum(merged))
            for w in obj["word_ids"]:
                if w is None:
                    continue
                total += 1
                pos += merged[w]
    if not ks or total == 0:
        raise ExportError(f"no rationale statistics available in split {stats_split!r}")
    manifest = {
        "format_version": FORMAT_VERSION,
        "dataset_id": dataset_id,
        "avg_rationale_k": max(1, round(sum(ks) / len(ks))),
        "positive_rate": pos / total,
        "splits": splits,
    }
    out_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest
