"""Dataset-level evaluation metrics.

Precision/recall/F1 are micro-aggregated: TP/FP/FN are summed over all
evaluated examples before any ratio is taken. AUROC and AUPR pool every
(score, label) pair across examples; AUROC uses the rank statistic
(probability a random positive outranks a random negative, ties counting
half), which equals the trapezoidal area under the ROC curve. AUPR is the
step-wise average-precision estimator over descending score thresholds.
Confidence intervals come from a percentile bootstrap over examples.
Krippendorff's alpha (nominal, with missing values) measures annotator
agreement.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, UndefinedMetricError


@dataclass
class ConfusionCounts:
    """Word-level decision counts for one example (or a sum of examples)."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )


@dataclass
class EvalReport:
    """One method's dataset-level scores plus per-example diagnostics.

    ``auroc``/``aupr`` are None when undefined (a single class in the pooled
    labels). The CI is clamped to contain the point estimate.
    """

    method_id: str
    dataset_id: str
    precision: float
    recall: float
    f1: float
    f1_ci_low: float
    f1_ci_high: float
    auroc: float | None
    aupr: float | None
    n_examples: int
    n_words: int
    per_example: list[dict] | None = None


def accumulate(pred_mask: Sequence[int], gold_mask: Sequence[int]) -> ConfusionCounts:
    """Count word-level decisions for one example."""
    if len(pred_mask) != len(gold_mask):
        raise DimensionError(
            f"prediction has {len(pred_mask)} words, gold has {len(gold_mask)}"
        )
    counts = ConfusionCounts()
    for p, g in zip(pred_mask, gold_mask):
        if p and g:
            counts.tp += 1
        elif p and not g:
            counts.fp += 1
        elif g:
            counts.fn += 1
        else:
            counts.tn += 1
    return counts


def dataset_f1(counts: Iterable[ConfusionCounts]) -> tuple[float, float, float]:
    """Micro precision, recall, and F1 from summed counts.

    Zero-denominator conventions: a vacuous side (nothing predicted and
    nothing to find) scores 1, a failing side scores 0, and F1 is 0 whenever
    P + R is 0. This keeps aggregates NaN-free and is conservative toward the
    method under test.
    """
    counts = list(counts)
    if not counts:
        raise UndefinedMetricError("no confusion counts to aggregate")
    tp = sum(c.tp for c in counts)
    fp = sum(c.fp for c in counts)
    fn = sum(c.fn for c in counts)
    return _prf(tp, fp, fn)


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    if tp + fp == 0:
        precision = 1.0 if fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 1.0 if fp == 0 else 0.0
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


def pooled_auroc(scored: Sequence[tuple[float, int]]) -> float:
    """Rank-statistic AUROC over pooled (score, label) pairs, ties counting half."""
    scores = np.asarray([s for s, _ in scored], dtype=np.float64)
    labels = np.asarray([g for _, g in scored], dtype=np.int64)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUROC undefined with {n_pos} positives and {n_neg} negatives"
        )
    ranks = _average_ranks(scores)
    pos_rank_sum = float(ranks[labels == 1].sum())
    u = pos_rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks, ties sharing the average rank of their block."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        ranks[order[i : j + 1]] = avg
        i = j + 1
    return ranks


def pooled_aupr(scored: Sequence[tuple[float, int]]) -> float:
    """Step-wise average precision over pooled (score, label) pairs."""
    scores = np.asarray([s for s, _ in scored], dtype=np.float64)
    labels = np.asarray([g for _, g in scored], dtype=np.int64)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AUPR undefined without positives")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    ap = 0.0
    tp = 0
    seen = 0
    prev_recall = 0.0
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        tp += int(sorted_labels[i : j + 1].sum())
        seen += j - i + 1
        recall = tp / n_pos
        precision = tp / seen
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return ap


def bootstrap_ci(
    per_example_counts: Sequence[ConfusionCounts],
    iterations: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for micro-F1, resampling whole examples.

    Replicate r draws its resample from a generator seeded by (seed, r), so
    the interval is reproducible however replicates are scheduled.
    """
    n = len(per_example_counts)
    if n < 2:
        raise UndefinedMetricError("bootstrap needs at least 2 examples")
    tp = np.asarray([c.tp for c in per_example_counts], dtype=np.int64)
    fp = np.asarray([c.fp for c in per_example_counts], dtype=np.int64)
    fn = np.asarray([c.fn for c in per_example_counts], dtype=np.int64)
    replicates = np.empty(iterations, dtype=np.float64)
    for r in range(iterations):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        idx = rng.integers(0, n, size=n)
        _, _, f1 = _prf(int(tp[idx].sum()), int(fp[idx].sum()), int(fn[idx].sum()))
        replicates[r] = f1
    tail = 100.0 * (1.0 - level) / 2.0
    low, high = np.percentile(replicates, [tail, 100.0 - tail])
    return float(low), float(high)


def krippendorff_alpha(annotations: Sequence[Sequence]) -> float:
    """Nominal-level Krippendorff's alpha; rows are annotators, columns items.

    Missing values are None or NaN. Items with fewer than two values are not
    pairable and drop out. Returns 1.0 when expected disagreement is zero
    (every pairable value identical).
    """
    units: list[list] = []
    n_items = max((len(row) for row in annotations), default=0)
    for col in range(n_items):
        values = []
        for row in annotations:
            if col >= len(row):
                continue
            v = row[col]
            if v is None or (isinstance(v, float) and np.isnan(v)):
                continue
            values.append(v)
        if len(values) >= 2:
            units.append(values)
    if not units:
        raise UndefinedMetricError("alpha undefined without co-annotated items")

    n = 0
    coincidence: dict[tuple, float] = defaultdict(float)
    marginal: dict[object, float] = defaultdict(float)
    for values in units:
        m = len(values)
        n += m
        weight = 1.0 / (m - 1)
        for i, a in enumerate(values):
            for j, b in enumerate(values):
                if i != j:
                    coincidence[(a, b)] += weight
    for (a, _), w in coincidence.items():
        marginal[a] += w

    d_observed = sum(w for (a, b), w in coincidence.items() if a != b) / n
    cats = list(marginal)
    d_expected = sum(
        marginal[a] * marginal[b] for a in cats for b in cats if a != b
    ) / (n * (n - 1))
    if d_expected == 0.0:
        return 1.0
    return 1.0 - d_observed / d_expected
