"""Adapters from annotated classification datasets to a common in-memory form.

Two input formats are supported:

generic (JSONL), one object per line:
    {"example_id": "...", "words": ["..."], "label": 0,
     "rationales": [{"annotator_id": "...", "mask": [0, 1, ...]}]}
Rationale masks are word-level binary vectors of the same length as "words".

hatexplain (native JSON), a dict mapping post ids to records with
"post_tokens", "annotators" (each {"label", "annotator_id", ...}) and
"rationales" (token-level binary masks over post_tokens). The example label
is the majority annotator label mapped through ``label_map``; posts without a
majority in the map (the neutral class by default), without rationales, or
with malformed rationale lengths are skipped and counted.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .tracefile import ExportError

logger = logging.getLogger(__name__)

HATEXPLAIN_LABEL_MAP = {"hatespeech": 0, "offensive": 1}


@dataclass
class AnnotatedExample:
    example_id: str
    words: list[str]
    label: int
    rationales: list[dict]  # {"annotator_id": str, "mask": list[int]}


def load_generic(path: str | Path) -> list[AnnotatedExample]:
    path = Path(path)
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                example = AnnotatedExample(
                    example_id=str(obj.get("example_id", f"{path.stem}-{line_no}")),
                    words=[str(w) for w in obj["words"]],
                    label=int(obj["label"]),
                    rationales=[
                        {"annotator_id": str(r["annotator_id"]),
                         "mask": [int(b) for b in r["mask"]]}
                        for r in obj.get("rationales", [])
                    ],
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ExportError(f"{path}:{line_no}: malformed example: {exc}") from exc
            for r in example.rationales:
                if len(r["mask"]) != len(example.words):
                    raise ExportError(
                        f"{path}:{line_no}: rationale length {len(r['mask'])} "
                        f"!= {len(example.words)} words"
                    )
            examples.append(example)
    return examples


def load_hatexplain(
    path: str | Path,
    label_map: dict[str, int] | None = None,
) -> list[AnnotatedExample]:
    label_map = HATEXPLAIN_LABEL_MAP if label_map is None else label_map
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    examples = []
    skipped = Counter()
    for post_id, obj in data.items():
        words = [str(w) for w in obj["post_tokens"]]
        labels = [ann["label"] for ann in obj["annotators"]]
        top, count = Counter(labels).most_common(1)[0]
        if count * 2 <= len(labels):
            skipped["no-majority"] += 1
            continue
        if top not in label_map:
            skipped["label-out-of-scope"] += 1
            continue
        masks = obj.get("rationales", [])
        if not masks:
            skipped["no-rationales"] += 1
            continue
        if any(len(m) != len(words) for m in masks):
            skipped["rationale-length"] += 1
            continue
        rationales = []
        for i, mask in enumerate(masks):
            annotator = (
                obj["annotators"][i]["annotator_id"]
                if i < len(obj["annotators"])
                else f"annotator{i}"
            )
            rationales.append(
                {"annotator_id": str(annotator), "mask": [int(b) for b in mask]}
            )
        examples.append(
            AnnotatedExample(
                example_id=str(post_id),
                words=words,
                label=label_map[top],
                rationales=rationales,
            )
        )
    if skipped:
        logger.info("hatexplain adapter skipped %s", dict(skipped))
    return examples


LOADERS = {"generic": load_generic, "hatexplain": load_hatexplain}
