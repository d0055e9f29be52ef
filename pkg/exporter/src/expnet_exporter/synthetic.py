"""Model-free synthetic trace generation with a planted importance rule.

The rule: a word is important iff the mean over heads of its subtokens'
token-to-task attention exceeds 0.5; important words draw that attention from
U(0.65, 0.95) per head, others from U(0.05, 0.35), so a classifier reading
the features recovers the rule exactly. Task-to-token rows are normalized to
sum 1 with roughly 3x the mass on important tokens, keeping both feature
directions informative. Rationales mirror the planted rule for every
annotator, and a configurable fraction of examples gets a wrong predicted
label to exercise correct-prediction filtering downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tracefile import TraceRecord, write_manifest_from_traces, write_records

RULE_THRESHOLD = 0.5


@dataclass
class SynthSpec:
    n_examples: int
    num_heads: int
    vocab: list[str]
    rule_seed: int
    dataset_id: str = "synthetic"
    example_prefix: str = "syn"
    n_annotators: int = 2
    importance_rate: float = 0.3
    wrong_pred_rate: float = 0.1
    min_words: int = 4
    max_words: int = 10


def _make_record(spec: SynthSpec, index: int, rng: np.random.Generator) -> TraceRecord:
    n_words = int(rng.integers(spec.min_words, spec.max_words + 1))
    important = (rng.random(n_words) < spec.importance_rate).astype(int)
    if not important.any():
        important[int(rng.integers(0, n_words))] = 1

    tokens = ["[CLS]"]
    word_ids: list[int | None] = [None]
    for w in range(n_words):
        tokens.append(spec.vocab[int(rng.integers(0, len(spec.vocab)))])
        word_ids.append(w)
        if rng.random() < 0.3:
            tokens.append("##" + spec.vocab[int(rng.integers(0, len(spec.vocab)))])
            word_ids.append(w)
    tokens.append("[SEP]")
    word_ids.append(None)
    t = len(tokens)
    h = spec.num_heads

    token_to_task = np.empty((h, t))
    for j, w in enumerate(word_ids):
        if w is not None and important[w]:
            token_to_task[:, j] = rng.uniform(0.65, 0.95, h)
        else:
            token_to_task[:, j] = rng.uniform(0.05, 0.35, h)

    weights = np.empty(t)
    for j, w in enumerate(word_ids):
        if j == 0:
            weights[j] = 1.0
        elif w is None:
            weights[j] = 0.5
        else:
            weights[j] = 3.0 if important[w] else 1.0
    task_to_token = weights[None, :] * rng.uniform(0.7, 1.3, size=(h, t))
    task_to_token /= task_to_token.sum(axis=1, keepdims=True)

    task32 = task_to_token.astype(np.float32)
    tok32 = token_to_task.astype(np.float32)
    tok32[:, 0] = task32[:, 0]

    label_gold = 1
    label_pred = label_gold if rng.random() >= spec.wrong_pred_rate else 1 - label_gold
    return TraceRecord(
        example_id=f"{spec.example_prefix}-{index:05d}",
        dataset_id=spec.dataset_id,
        tokens=tokens,
        cls_index=0,
        word_ids=word_ids,
        num_heads=h,
        attn_task_to_token=task32,
        attn_token_to_task=tok32,
        label_gold=label_gold,
        label_pred=label_pred,
        rationales=[
            {"annotator_id": f"ann{a}", "mask": [int(b) for b in important]}
            for a in range(spec.n_annotators)
        ],
    )


def generate_synthetic(spec: SynthSpec, out_path: str | Path) -> int:
    """Write a planted-rule trace file; returns the number of traces."""
    rng = np.random.default_rng(spec.rule_seed)
    records = [_make_record(spec, i, rng) for i in range(spec.n_examples)]
    return write_records(records, out_path)


def generate_dataset(
    out_dir: str | Path,
    dataset_id: str,
    n_train: int,
    n_test: int,
    num_heads: int,
    vocab: list[str],
    rule_seed: int,
    **spec_overrides,
) -> Path:
    """Write train/test trace files plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(rule_seed)
    for split, n, prefix in (("train", n_train, "tr"), ("test", n_test, "te")):
        spec = SynthSpec(
            n_examples=n,
            num_heads=num_heads,
            vocab=vocab,
            rule_seed=rule_seed,
            dataset_id=dataset_id,
            example_prefix=f"{dataset_id}-{prefix}",
            **spec_overrides,
        )
        records = [_make_record(spec, i, rng) for i in range(n)]
        write_records(records, out_dir / f"{dataset_id}.{split}.jsonl")
    return_path = out_dir / f"{dataset_id}.manifest.json"
    write_manifest_from_traces(
        return_path,
        dataset_id,
        splits={
            "train": [f"{dataset_id}.train.jsonl"],
            "test": [f"{dataset_id}.test.jsonl"],
        },
    )
    return return_path
