import numpy as np
import pytest

from expnet_kit.trace import AttentionTrace, RationaleAnnotation


def build_trace(
    *,
    example_id="ex-0",
    dataset_id="demo",
    tokens,
    word_ids,
    task_to_token,
    token_to_task,
    cls_index=0,
    num_heads=None,
    label_gold=1,
    label_pred=1,
    rationales=None,
):
    """Construct a trace verbatim from the given matrices (no fixing-up)."""
    task = np.asarray(task_to_token, dtype=np.float32)
    if num_heads is None:
        num_heads = task.shape[0]
    if rationales is None:
        n_words = 1 + max(w for w in word_ids if w is not None)
        rationales = [RationaleAnnotation("ann0", [0] * n_words)]
    return AttentionTrace(
        example_id=example_id,
        dataset_id=dataset_id,
        tokens=list(tokens),
        cls_index=cls_index,
        word_ids=list(word_ids),
        num_heads=num_heads,
        attn_task_to_token=task,
        attn_token_to_task=np.asarray(token_to_task, dtype=np.float32),
        label_gold=label_gold,
        label_pred=label_pred,
        rationales=rationales,
    )


def simple_trace(**overrides):
    """A small hand-checked valid trace: [CLS] w0 w0' w1 [SEP], two heads.

    Word 0 splits into two subtokens; every task-to-token row sums to 1 and
    the aggregation-token column matches the row at position 0.
    """
    kwargs = dict(
        tokens=["[CLS]", "al", "##pha", "beta", "[SEP]"],
        word_ids=[None, 0, 0, 1, None],
        task_to_token=[
            [0.10, 0.30, 0.20, 0.25, 0.15],
            [0.20, 0.25, 0.15, 0.30, 0.10],
        ],
        token_to_task=[
            [0.10, 0.40, 0.50, 0.60, 0.20],
            [0.20, 0.30, 0.60, 0.70, 0.10],
        ],
        rationales=[
            RationaleAnnotation("ann0", [1, 0]),
            RationaleAnnotation("ann1", [1, 1]),
        ],
    )
    kwargs.update(overrides)
    return build_trace(**kwargs)


@pytest.fixture
def valid_trace():
    return simple_trace()


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
