"""Per-token attention features and word-to-token label projection.

Each candidate token j (anything with a word id) is described by the 2H vector
[task_to_token head 1..H, token_to_task head 1..H] copied straight from the
trace. No normalization or scaling is applied; attention weights are already
in [0, 1]. Ablations drop one of the two halves.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import UndefinedMetricError, ValidationError
from .trace import AttentionTrace


class FeatureMask(Enum):
    """Which half of the feature vector survives; FULL keeps both directions."""

    FULL = "full"
    TASK_TO_TOKEN_ONLY = "task_to_token_only"
    TOKEN_TO_TASK_ONLY = "token_to_task_only"

    def input_dim(self, num_heads: int) -> int:
        return 2 * num_heads if self is FeatureMask.FULL else num_heads


@dataclass
class TokenFeatureVector:
    example_id: str
    token_index: int
    values: np.ndarray


@dataclass
class LabeledToken:
    feature: TokenFeatureVector
    target: int


def extract_features(trace: AttentionTrace, mask: FeatureMask = FeatureMask.FULL) -> list[TokenFeatureVector]:
    """One feature vector per candidate token, in token order.

    The aggregation token and other null-word-id tokens (separators, padding)
    are never candidates: human rationales only cover input words.
    """
    full = np.concatenate([trace.attn_task_to_token, trace.attn_token_to_task], axis=0)
    h = trace.num_heads
    if mask is FeatureMask.TASK_TO_TOKEN_ONLY:
        full = full[:h]
    elif mask is FeatureMask.TOKEN_TO_TASK_ONLY:
        full = full[h:]
    return [
        TokenFeatureVector(example_id=trace.example_id, token_index=j, values=full[:, j].copy())
        for j in trace.candidate_indices()
    ]


def project_labels(
    trace: AttentionTrace,
    merged_rationale: Sequence[int],
    mask: FeatureMask = FeatureMask.FULL,
) -> list[LabeledToken]:
    """Copy each word's rationale bit onto all of its subword tokens.

    ``merged_rationale`` is a single binary vector over words (annotator
    merging happens upstream).
    """
    if len(merged_rationale) != trace.num_words:
        raise ValidationError(
            "rationale-length",
            f"rationale has {len(merged_rationale)} entries for {trace.num_words} words",
            example_id=trace.example_id,
        )
    features = extract_features(trace, mask)
    return [
        LabeledToken(feature=fv, target=int(merged_rationale[trace.word_ids[fv.token_index]]))
        for fv in features
    ]


def compute_positive_rate(labeled: Sequence[LabeledToken]) -> float:
    """Fraction of tokens whose target is 1."""
    if not labeled:
        raise UndefinedMetricError("positive rate of an empty token set is undefined")
    return sum(tok.target for tok in labeled) / len(labeled)
