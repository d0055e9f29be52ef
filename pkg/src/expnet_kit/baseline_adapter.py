"""Bridges external explainers into the evaluation pipeline.

Any method that emits continuous token or word scores can be evaluated: scores
arrive in a line-delimited file, get aggregated to word level (max over a
word's subtokens), and are binarized by top-K selection, where K is the
dataset's average human-rationale length. Also hosts the random baseline,
which marks words independently at the training data's positive rate.

Binarization rules: strictly negative scores are never selected; remaining
words are ranked by score descending with ties broken by earlier position
(position index also serves as the deterministic final tie-break); if fewer
than K non-negative candidates exist, all of them are selected.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError, ParseError, ValidationError
from .trace import FORMAT_VERSION, AttentionTrace

RANDOM_METHOD_ID = "random"

_GRANULARITIES = ("token", "word")


@dataclass
class ScoreRecord:
    """One method's raw scores for one example, at token or word granularity."""

    example_id: str
    method_id: str
    scores: list[float]
    granularity: str


@dataclass
class Explanation:
    """Continuous scores and a binary importance mask for one example.

    ``token_scores`` is None for methods that never had token-level scores
    (word-granularity score files, the random baseline). ``word_scores`` and
    ``word_mask`` always cover every word.
    """

    example_id: str
    method_id: str
    token_scores: list[float] | None
    word_scores: list[float]
    word_mask: list[int]


def aggregate_to_words(trace: AttentionTrace, token_scores: Sequence[float]) -> list[float]:
    """Word score = max over the word's subtoken scores; null-word tokens are ignored."""
    if len(token_scores) != trace.num_tokens:
        raise DimensionError(
            f"got {len(token_scores)} token scores for {trace.num_tokens} tokens",
            example_id=trace.example_id,
        )
    n_words = trace.num_words
    word_scores: list[float] = [0.0] * n_words
    seen = [False] * n_words
    for j, w in enumerate(trace.word_ids):
        if w is None:
            continue
        s = float(token_scores[j])
        word_scores[w] = s if not seen[w] else max(word_scores[w], s)
        seen[w] = True
    return word_scores


def binarize_topk(word_scores: Sequence[float], k: int) -> list[int]:
    """Select the k highest-scoring words as a binary mask.

    Strictly negative scores are excluded from candidacy entirely; if fewer
    than k candidates remain (short sequences included), every candidate is
    selected. Ties at the boundary go to the earlier position.
    """
    if k < 1:
        raise ValidationError("top-k", f"k must be >= 1, got {k}")
    candidates = [(-float(s), i) for i, s in enumerate(word_scores) if s >= 0]
    candidates.sort()
    mask = [0] * len(word_scores)
    for _, i in candidates[:k]:
        mask[i] = 1
    return mask


def _example_rng(example_id: str, seed: int) -> np.random.Generator:
    # Stable per (example_id, seed) regardless of call order or process: the
    # id is hashed with sha256, not Python's salted hash().
    digest = hashlib.sha256(example_id.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([seed, *words]))


def random_baseline(trace: AttentionTrace, positive_rate: float, seed: int) -> Explanation:
    """Mark each word important independently with the given probability.

    The continuous word score is 1 - u for the uniform draw u that produced
    the bit, so scores rank consistently with the mask (mask = top scores
    above 1 - positive_rate) while carrying no information about the example.
    """
    if not (0.0 <= positive_rate <= 1.0):
        raise ValidationError(
            "positive-rate", f"positive_rate must lie in [0, 1], got {positive_rate}"
        )
    rng = _example_rng(trace.example_id, seed)
    u = rng.random(trace.num_words)
    mask = (u < positive_rate).astype(int)
    return Explanation(
        example_id=trace.example_id,
        method_id=RANDOM_METHOD_ID,
        token_scores=None,
        word_scores=[float(s) for s in 1.0 - u],
        word_mask=[int(b) for b in mask],
    )


def load_scores(
    path: str | Path,
    traces: Iterable[AttentionTrace] | Mapping[str, AttentionTrace],
) -> list[ScoreRecord]:
    """Read a line-delimited score file and validate it against its traces.

    Every record must reference a known example_id, and its score vector must
    match that trace's token count (token granularity) or word count (word
    granularity).
    """
    if isinstance(traces, Mapping):
        by_id = dict(traces)
    else:
        by_id = {t.example_id: t for t in traces}
    path = Path(path)
    records: list[ScoreRecord] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line=line_no) from exc
            if obj.get("format_version") != FORMAT_VERSION:
                raise ParseError(
                    f"unsupported format_version {obj.get('format_version')!r}",
                    path=str(path),
                    line=line_no,
                )
            try:
                record = ScoreRecord(
                    example_id=str(obj["example_id"]),
                    method_id=str(obj["method_id"]),
                    scores=[float(s) for s in obj["scores"]],
                    granularity=str(obj["granularity"]),
                )
            except (TypeError, KeyError, ValueError) as exc:
                raise ParseError(f"malformed record: {exc}", path=str(path), line=line_no) from exc
            if record.granularity not in _GRANULARITIES:
                raise ValidationError(
                    "score-granularity",
                    f"granularity must be one of {_GRANULARITIES}, got {record.granularity!r}",
                    example_id=record.example_id,
                )
            trace = by_id.get(record.example_id)
            if trace is None:
                raise ValidationError(
                    "score-example-id",
                    "score record references an unknown example",
                    example_id=record.example_id,
                )
            expected = trace.num_tokens if record.granularity == "token" else trace.num_words
            if len(record.scores) != expected:
                raise DimensionError(
                    f"{record.granularity}-level scores have length {len(record.scores)}, "
                    f"expected {expected}",
                    example_id=record.example_id,
                )
            records.append(record)
    return records


def write_scores(records: Iterable[ScoreRecord], path: str | Path) -> None:
    """Write score records as one JSON object per line (float32 decimals)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "format_version": FORMAT_VERSION,
                "example_id": rec.example_id,
                "method_id": rec.method_id,
                "granularity": rec.granularity,
                "scores": [float(np.float32(s)) for s in rec.scores],
            }
            fh.write(json.dumps(obj))
            fh.write("\n")


def explanation_from_scores(
    trace: AttentionTrace, record: ScoreRecord, k: int
) -> Explanation:
    """Aggregate a score record to word level and binarize it with top-K."""
    if record.granularity == "token":
        token_scores = [float(s) for s in record.scores]
        word_scores = aggregate_to_words(trace, token_scores)
    else:
        token_scores = None
        word_scores = [float(s) for s in record.scores]
        if len(word_scores) != trace.num_words:
            raise DimensionError(
                f"word-level scores have length {len(word_scores)}, expected {trace.num_words}",
                example_id=trace.example_id,
            )
    return Explanation(
        example_id=trace.example_id,
        method_id=record.method_id,
        token_scores=token_scores,
        word_scores=word_scores,
        word_mask=binarize_topk(word_scores, k),
    )


def write_explanations(explanations: Iterable[Explanation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in explanations:
            obj = {
                "format_version": FORMAT_VERSION,
                "example_id": e.example_id,
                "method_id": e.method_id,
                "token_scores": e.token_scores,
                "word_scores": e.word_scores,
                "word_mask": e.word_mask,
            }
            fh.write(json.dumps(obj))
            fh.write("\n")


def load_explanations(path: str | Path) -> list[Explanation]:
    path = Path(path)
    out: list[Explanation] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line=line_no) from exc
            if obj.get("format_version") != FORMAT_VERSION:
                raise ParseError(
                    f"unsupported format_version {obj.get('format_version')!r}",
                    path=str(path),
                    line=line_no,
                )
            try:
                out.append(
                    Explanation(
                        example_id=str(obj["example_id"]),
                        method_id=str(obj["method_id"]),
                        token_scores=(
                            None
                            if obj["token_scores"] is None
                            else [float(s) for s in obj["token_scores"]]
                        ),
                        word_scores=[float(s) for s in obj["word_scores"]],
                        word_mask=[int(b) for b in obj["word_mask"]],
                    )
                )
            except (TypeError, KeyError, ValueError) as exc:
                raise ParseError(f"malformed record: {exc}", path=str(path), line=line_no) from exc
    return out
