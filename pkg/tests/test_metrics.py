import numpy as np
import pytest

from expnet_kit.errors import DimensionError, UndefinedMetricError
from expnet_kit.metrics import (
    ConfusionCounts,
    accumulate,
    bootstrap_ci,
    dataset_f1,
    krippendorff_alpha,
    pooled_aupr,
    pooled_auroc,
)


# Independent oracles: written against the definitions, not the implementation.


def brute_force_f1_on_concatenation(examples):
    pred = [b for p, _ in examples for b in p]
    gold = [b for _, g in examples for b in g]
    tp = sum(1 for p, g in zip(pred, gold) if p and g)
    fp = sum(1 for p, g in zip(pred, gold) if p and not g)
    fn = sum(1 for p, g in zip(pred, gold) if g and not p)
    if tp + fp == 0:
        precision = 1.0 if fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 1.0 if fp == 0 else 0.0
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def pair_counting_auroc(scored):
    positives = [s for s, g in scored if g == 1]
    negatives = [s for s, g in scored if g == 0]
    favorable = 0.0
    for p in positives:
        for q in negatives:
            if p > q:
                favorable += 1.0
            elif p == q:
                favorable += 0.5
    return favorable / (len(positives) * len(negatives))


def trapezoid_auroc(scored):
    scores = np.array([s for s, _ in scored])
    labels = np.array([g for _, g in scored])
    n_pos = labels.sum()
    n_neg = len(labels) - n_pos
    points = [(0.0, 0.0)]
    for tau in sorted(set(scores), reverse=True):
        sel = scores >= tau
        tpr = labels[sel].sum() / n_pos
        fpr = (sel.sum() - labels[sel].sum()) / n_neg
        points.append((fpr, tpr))
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y1 + y0) / 2.0
    return area


def threshold_sweep_aupr(scored):
    scores = np.array([s for s, _ in scored])
    labels = np.array([g for _, g in scored])
    n_pos = labels.sum()
    ap = 0.0
    prev_recall = 0.0
    for tau in sorted(set(scores), reverse=True):
        sel = scores >= tau
        tp = int(labels[sel].sum())
        recall = tp / n_pos
        precision = tp / int(sel.sum())
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def random_example_set(rng, n_examples=None, max_words=12):
    n_examples = n_examples or int(rng.integers(1, 6))
    examples = []
    for _ in range(n_examples):
        n = int(rng.integers(1, max_words + 1))
        pred = [int(b) for b in rng.integers(0, 2, n)]
        gold = [int(b) for b in rng.integers(0, 2, n)]
        examples.append((pred, gold))
    return examples


class TestAccumulate:
    def test_hand_counted(self):
        c = accumulate([1, 1, 0], [1, 0, 1])
        assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 0)

    def test_perfect_prediction(self):
        c = accumulate([1, 0, 1], [1, 0, 1])
        assert c.fp == 0 and c.fn == 0

    def test_all_negative(self):
        c = accumulate([0, 0, 0], [0, 0, 0])
        assert (c.tp, c.fp, c.fn, c.tn) == (0, 0, 0, 3)

    def test_total_equals_words(self):
        c = accumulate([1, 0, 1, 0], [0, 1, 1, 0])
        assert c.tp + c.fp + c.fn + c.tn == 4

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            accumulate([1, 0], [1])


class TestDatasetF1:
    def test_hand_arithmetic(self):
        counts = [ConfusionCounts(tp=2, fp=1, fn=1)]
        precision, recall, f1 = dataset_f1(counts)
        assert f1 == pytest.approx(4 / 6)

    def test_perfect(self):
        assert dataset_f1([ConfusionCounts(tp=5)]) == (1.0, 1.0, 1.0)

    def test_zero_tp_convention(self):
        assert dataset_f1([ConfusionCounts(fp=2, fn=3)]) == (0.0, 0.0, 0.0)

    def test_vacuous_convention(self):
        assert dataset_f1([ConfusionCounts(tn=4)]) == (1.0, 1.0, 1.0)

    def test_matches_concatenation_oracle(self, rng):
        for _ in range(300):
            examples = random_example_set(rng)
            counts = [accumulate(p, g) for p, g in examples]
            assert dataset_f1(counts) == pytest.approx(
                brute_force_f1_on_concatenation(examples), abs=1e-12
            )

    def test_permutation_invariant(self, rng):
        examples = random_example_set(rng, n_examples=6)
        counts = [accumulate(p, g) for p, g in examples]
        shuffled = list(counts)
        rng.shuffle(shuffled)
        assert dataset_f1(counts) == dataset_f1(shuffled)


def random_scored(rng, allow_ties=True):
    n = int(rng.integers(2, 40))
    if allow_ties:
        scores = rng.choice([0.0, 0.1, 0.25, 0.5, 0.75, 0.9], size=n)
    else:
        scores = rng.uniform(0, 1, size=n)
    labels = rng.integers(0, 2, n)
    if labels.sum() == 0:
        labels[0] = 1
    if labels.sum() == len(labels):
        labels[0] = 0
    return [(float(s), int(g)) for s, g in zip(scores, labels)]


class TestPooledAuroc:
    def test_perfect_ranking(self):
        assert pooled_auroc([(0.9, 1), (0.8, 1), (0.2, 0), (0.1, 0)]) == 1.0

    def test_all_equal_scores(self):
        assert pooled_auroc([(0.5, 1), (0.5, 0), (0.5, 1), (0.5, 0)]) == 0.5

    def test_hand_counted_pairs(self):
        # favorable pairs: 0.9>0.8, 0.9>0.1, 0.7>0.1 -> 3 of 4
        scored = [(0.9, 1), (0.8, 0), (0.7, 1), (0.1, 0)]
        assert pooled_auroc(scored) == 0.75

    def test_degenerate_rejected(self):
        with pytest.raises(UndefinedMetricError):
            pooled_auroc([(0.5, 1), (0.4, 1)])
        with pytest.raises(UndefinedMetricError):
            pooled_auroc([(0.5, 0), (0.4, 0)])

    def test_matches_pair_counting_and_trapezoid(self, rng):
        for _ in range(200):
            scored = random_scored(rng)
            value = pooled_auroc(scored)
            assert value == pytest.approx(pair_counting_auroc(scored), abs=1e-12)
            assert value == pytest.approx(trapezoid_auroc(scored), abs=1e-12)

    def test_invariant_under_increasing_transform(self, rng):
        for _ in range(50):
            scored = random_scored(rng)
            transformed = [(np.exp(3 * s + 1), g) for s, g in scored]
            assert pooled_auroc(scored) == pytest.approx(
                pooled_auroc(transformed), abs=1e-12
            )

    def test_permutation_invariant(self, rng):
        scored = random_scored(rng)
        shuffled = list(scored)
        rng.shuffle(shuffled)
        assert pooled_auroc(scored) == pytest.approx(pooled_auroc(shuffled), abs=1e-12)


class TestPooledAupr:
    def test_perfect_ranking(self):
        assert pooled_aupr([(0.9, 1), (0.8, 1), (0.2, 0)]) == 1.0

    def test_single_positive_ranked_last(self):
        scored = [(0.9, 0), (0.8, 0), (0.7, 0), (0.1, 1)]
        assert pooled_aupr(scored) == pytest.approx(1 / 4)

    def test_positive_ranked_first(self):
        assert pooled_aupr([(0.9, 1), (0.8, 0)]) == 1.0

    def test_no_positives_rejected(self):
        with pytest.raises(UndefinedMetricError):
            pooled_aupr([(0.5, 0)])

    def test_matches_threshold_sweep_oracle(self, rng):
        for _ in range(200):
            scored = random_scored(rng)
            assert pooled_aupr(scored) == pytest.approx(
                threshold_sweep_aupr(scored), abs=1e-12
            )


class TestBootstrapCI:
    def test_identical_examples_degenerate(self):
        counts = [ConfusionCounts(tp=2, fp=1, fn=1)] * 5
        low, high = bootstrap_ci(counts, iterations=200, seed=1)
        _, _, f1 = dataset_f1(counts)
        assert low == high == pytest.approx(f1)

    def test_same_seed_same_interval(self, rng):
        counts = [
            ConfusionCounts(tp=int(rng.integers(0, 5)), fp=int(rng.integers(0, 5)),
                            fn=int(rng.integers(0, 5)))
            for _ in range(20)
        ]
        assert bootstrap_ci(counts, seed=9) == bootstrap_ci(counts, seed=9)

    def test_interval_contains_point_estimate_on_fixtures(self, rng):
        for _ in range(10):
            counts = [
                ConfusionCounts(tp=int(rng.integers(0, 6)), fp=int(rng.integers(0, 4)),
                                fn=int(rng.integers(0, 4)))
                for _ in range(30)
            ]
            low, high = bootstrap_ci(counts, iterations=500, seed=3)
            _, _, f1 = dataset_f1(counts)
            assert low <= f1 <= high

    def test_too_few_examples(self):
        with pytest.raises(UndefinedMetricError):
            bootstrap_ci([ConfusionCounts(tp=1)])


def brute_force_alpha(annotations):
    """Build the full coincidence matrix explicitly and apply 1 - Do/De."""
    units = []
    n_items = max(len(row) for row in annotations)
    for col in range(n_items):
        vals = [
            row[col]
            for row in annotations
            if col < len(row)
            and row[col] is not None
            and not (isinstance(row[col], float) and np.isnan(row[col]))
        ]
        if len(vals) >= 2:
            units.append(vals)
    cats = sorted({v for u in units for v in u})
    index = {c: i for i, c in enumerate(cats)}
    o = np.zeros((len(cats), len(cats)))
    for vals in units:
        m = len(vals)
        for i in range(m):
            for j in range(m):
                if i != j:
                    o[index[vals[i]], index[vals[j]]] += 1.0 / (m - 1)
    n = o.sum()
    nc = o.sum(axis=1)
    d_o = sum(o[i, j] for i in range(len(cats)) for j in range(len(cats)) if i != j) / n
    d_e = sum(
        nc[i] * nc[j] for i in range(len(cats)) for j in range(len(cats)) if i != j
    ) / (n * (n - 1))
    if d_e == 0:
        return 1.0
    return 1.0 - d_o / d_e


class TestKrippendorffAlpha:
    def test_perfect_agreement_is_exactly_one(self):
        rows = [[0, 1, 1, 0, 1], [0, 1, 1, 0, 1]]
        assert krippendorff_alpha(rows) == 1.0

    def test_systematic_disagreement_is_negative(self):
        # 4 items, 50/50 marginals, zero agreement; by hand: Do=1, De=4/7,
        # alpha = 1 - 7/4 = -0.75
        rows = [[0, 1, 0, 1], [1, 0, 1, 0]]
        alpha = krippendorff_alpha(rows)
        assert alpha == pytest.approx(-0.75)
        assert alpha == pytest.approx(brute_force_alpha(rows))

    def test_independent_random_near_zero(self):
        rng = np.random.default_rng(123)
        rows = rng.integers(0, 2, size=(2, 10_000)).tolist()
        assert abs(krippendorff_alpha(rows)) < 0.05

    def test_missing_values_ignored(self):
        rows = [[0, 1, None, 1], [0, 1, 1, None], [None, 1, 1, 1]]
        assert krippendorff_alpha(rows) == pytest.approx(brute_force_alpha(rows))

    def test_no_coannotated_items(self):
        with pytest.raises(UndefinedMetricError):
            krippendorff_alpha([[0, None], [None, 1]])

    def test_matches_brute_force_on_random_fixtures(self, rng):
        for _ in range(100):
            n_ann = int(rng.integers(2, 5))
            n_items = int(rng.integers(2, 20))
            rows = []
            for _ in range(n_ann):
                row = [
                    None if rng.random() < 0.2 else int(rng.integers(0, 2))
                    for _ in range(n_items)
                ]
                rows.append(row)
            pairable = False
            for col in range(n_items):
                if sum(1 for row in rows if row[col] is not None) >= 2:
                    pairable = True
            if not pairable:
                continue
            assert krippendorff_alpha(rows) == pytest.approx(
                brute_force_alpha(rows), abs=1e-12
            )

    def test_all_identical_values_degenerate(self):
        assert krippendorff_alpha([[1, 1, 1], [1, 1, 1]]) == 1.0
