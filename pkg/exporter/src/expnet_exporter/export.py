"""Attention-trace export from a fine-tuned encoder classifier.

The classifier runs in eval mode (dropout off) with attention outputs on; the
final self-attention layer's post-softmax weights are sliced at the
aggregation token: its row becomes task-to-token attention, its column
token-to-task attention, per head. Word ids come from the tokenizer's
word-level alignment of pre-split input words, so rationales stay aligned
to the emitted tokens.

Examples longer than the sequence-length budget are skipped and counted, not
truncated: truncation would orphan rationale words. The job parameters and
skip counts land in a ``<output>.meta.json`` sidecar, since the trace format
itself is header-free.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .datasets import LOADERS, AnnotatedExample
from .tracefile import ExportError, TraceRecord, check_record, write_records

logger = logging.getLogger(__name__)


@dataclass
class ExportJob:
    model_ref: str
    data_path: str
    data_format: str  # key into datasets.LOADERS
    dataset_id: str
    output_path: str
    max_sequence_length: int = 128
    device: str = "cpu"


@dataclass
class ExportStats:
    n_exported: int = 0
    n_skipped_too_long: int = 0
    skipped_example_ids: list[str] = field(default_factory=list)
    num_heads: int = 0


def load_checkpoint(model_ref: str, device: str = "cpu"):
    """Tokenizer and classifier from one checkpoint, eager attention, eval mode."""
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_ref)
    model = AutoModelForSequenceClassification.from_pretrained(
        model_ref, attn_implementation="eager"
    )
    model.to(device)
    model.eval()
    return tokenizer, model


def _check_alignment(example_id: str, word_ids: list[int | None], n_words: int) -> None:
    present = [w for w in word_ids if w is not None]
    if any(b < a for a, b in zip(present, present[1:])) or set(present) != set(range(n_words)):
        raise ExportError(
            f"{example_id}: tokenizer produced word ids {sorted(set(present))} "
            f"for {n_words} words (a word yielded no tokens or order broke)"
        )


def export_example(
    example: AnnotatedExample,
    tokenizer,
    model,
    dataset_id: str,
    max_sequence_length: int,
    device: str = "cpu",
) -> TraceRecord | None:
    """One trace record, or None when the example exceeds the length budget."""
    enc = tokenizer(example.words, is_split_into_words=True, return_tensors="pt")
    input_ids = enc["input_ids"][0]
    if len(input_ids) > max_sequence_length:
        return None

    word_ids = enc.word_ids(0)
    _check_alignment(example.example_id, word_ids, len(example.words))
    ids = input_ids.tolist()
    if tokenizer.cls_token_id not in ids:
        raise ExportError(f"{example.example_id}: no aggregation token in the encoding")
    cls_index = ids.index(tokenizer.cls_token_id)
    if word_ids[cls_index] is not None:
        raise ExportError(f"{example.example_id}: aggregation token carries a word id")

    with torch.no_grad():
        out = model(**{k: v.to(device) for k, v in enc.items()}, output_attentions=True)
    final_layer = out.attentions[-1][0]  # (H, T, T), post-softmax
    task_to_token = final_layer[:, cls_index, :].cpu().numpy().astype(np.float32)
    token_to_task = final_layer[:, :, cls_index].cpu().numpy().astype(np.float32)
    label_pred = int(out.logits[0].argmax().item())

    record = TraceRecord(
        example_id=example.example_id,
        dataset_id=dataset_id,
        tokens=tokenizer.convert_ids_to_tokens(ids),
        cls_index=cls_index,
        word_ids=list(word_ids),
        num_heads=int(model.config.num_attention_heads),
        attn_task_to_token=task_to_token,
        attn_token_to_task=token_to_task,
        label_gold=example.label,
        label_pred=label_pred,
        rationales=example.rationales,
    )
    check_record(record)
    return record


def export(job: ExportJob) -> ExportStats:
    """Run the classifier over the dataset and write one trace per example."""
    if job.data_format not in LOADERS:
        raise ExportError(f"unknown data format {job.data_format!r}; use one of {sorted(LOADERS)}")
    examples = LOADERS[job.data_format](job.data_path)
    tokenizer, model = load_checkpoint(job.model_ref, job.device)

    stats = ExportStats(num_heads=int(model.config.num_attention_heads))
    records = []
    for example in examples:
        record = export_example(
            example, tokenizer, model, job.dataset_id, job.max_sequence_length, job.device
        )
        if record is None:
            stats.n_skipped_too_long += 1
            stats.skipped_example_ids.append(example.example_id)
            logger.warning(
                "skipping %s: longer than %d tokens", example.example_id, job.max_sequence_length
            )
            continue
        records.append(record)
    stats.n_exported = write_records(records, job.output_path)

    meta_path = f"{job.output_path}.meta.json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump({"job": asdict(job), "stats": asdict(stats)}, fh, indent=2)
        fh.write("\n")
    return stats
