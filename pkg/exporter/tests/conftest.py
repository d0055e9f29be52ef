import json
import shutil
import subprocess

import pytest

# words the test vocabulary fully covers, including multi-piece splits
VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "cat", "sat", "on", "mat", "dog", "ran", "fast", "slow",
    "good", "bad", "very", "film", "was", "great", "awful", "plot",
    "##s", "##ing", "##ly", "##ed",
]


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    """A tiny randomly initialized 12-head encoder classifier, fully offline."""
    from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, processors
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizerFast

    ckpt = tmp_path_factory.mktemp("ckpt")
    vmap = {w: i for i, w in enumerate(VOCAB)}
    core = Tokenizer(models.WordPiece(vocab=vmap, unk_token="[UNK]"))
    core.normalizer = normalizers.BertNormalizer(lowercase=True)
    core.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    core.post_processor = processors.BertProcessing(
        sep=("[SEP]", vmap["[SEP]"]), cls=("[CLS]", vmap["[CLS]"])
    )
    tokenizer = BertTokenizerFast(
        tokenizer_object=core,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=48,
        num_hidden_layers=2,
        num_attention_heads=12,
        intermediate_size=96,
        max_position_embeddings=64,
        num_labels=2,
    )
    import torch

    torch.manual_seed(7)
    model = BertForSequenceClassification(config)
    model.save_pretrained(ckpt)
    tokenizer.save_pretrained(ckpt)
    return ckpt


@pytest.fixture(scope="session")
def generic_dataset(tmp_path_factory):
    """A small annotated dataset over the checkpoint's vocabulary."""
    path = tmp_path_factory.mktemp("data") / "examples.jsonl"
    examples = [
        {"words": ["the", "film", "was", "great"], "label": 1,
         "masks": [[0, 0, 0, 1], [0, 1, 0, 1]]},
        {"words": ["the", "plot", "was", "awful"], "label": 0,
         "masks": [[0, 0, 0, 1], [0, 0, 0, 1]]},
        {"words": ["cats", "sat", "on", "mats"], "label": 1,
         "masks": [[1, 0, 0, 0], [1, 0, 0, 1]]},
        {"words": ["the", "dog", "ran", "fast"], "label": 0,
         "masks": [[0, 1, 1, 0], [0, 1, 0, 0]]},
        {"words": ["very", "good", "film"], "label": 1,
         "masks": [[0, 1, 0], [0, 1, 0]]},
        {"words": ["the", "slow", "bad", "film", "was", "slowed"], "label": 0,
         "masks": [[0, 1, 1, 0, 0, 1], [0, 0, 1, 0, 0, 1]]},
    ]
    with open(path, "w", encoding="utf-8") as fh:
        for i, ex in enumerate(examples):
            fh.write(json.dumps({
                "example_id": f"g-{i:03d}",
                "words": ex["words"],
                "label": ex["label"],
                "rationales": [
                    {"annotator_id": f"ann{j}", "mask": m}
                    for j, m in enumerate(ex["masks"])
                ],
            }) + "\n")
    return path


@pytest.fixture(scope="session")
def primary_cli():
    """Path to the installed expnet-kit CLI (the toolkit's external interface)."""
    path = shutil.which("expnet-kit")
    assert path, "expnet-kit must be installed for exporter acceptance"
    return path


def run_validate(primary_cli, trace_path):
    return subprocess.run(
        [primary_cli, "validate", str(trace_path)], capture_output=True, text=True
    )
