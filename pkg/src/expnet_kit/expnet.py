"""The learned explainer: a 2H -> 16 -> 1 network trained with focal loss.

Forward pass:  y_hat = sigmoid(w2 . relu(W1 f + b1) + b2)
Loss per token: -alpha_t * (1 - p_t)^gamma * log(p_t), with p_t = y_hat when
the token is important and 1 - y_hat otherwise, and alpha_t = alpha or
1 - alpha correspondingly. Gradients are analytic; the optimizer is
mini-batch Adam over the mean loss per batch.

Everything is deterministic for a fixed seed: initialization, the per-epoch
shuffle, batch traversal, and the within-batch accumulation order. Internals
run in float64; a trained model is stored in float32 so the model file
round-trips bit-for-bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .baseline_adapter import Explanation
from .errors import (
    DimensionError,
    ParseError,
    TrainingDivergedError,
    ValidationError,
)
from .features import FeatureMask, LabeledToken, extract_features
from .trace import FORMAT_VERSION, AttentionTrace

EXPNET_METHOD_ID = "expnet"

HIDDEN_DIM = 16

# p_t is clamped here before the log; prevents log(0) without measurably
# biasing gradients at float32 scale.
LOSS_EPS = 1e-7

# sigmoid outputs are clipped away from exact 0/1, which float underflow
# would otherwise produce for |z| beyond ~745.
_SIGMOID_EPS = 1e-12


@dataclass
class TrainingConfig:
    epochs: int = 50
    learning_rate: float = 0.001
    batch_size: int = 32
    alpha: float = 0.6
    gamma: float = 2.0
    threshold: float = 0.5
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValidationError("training-config", "epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValidationError("training-config", "learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValidationError("training-config", "batch_size must be >= 1")
        if not (0.0 < self.alpha < 1.0):
            raise ValidationError("training-config", "alpha must lie in (0, 1)")
        if self.gamma < 0:
            raise ValidationError("training-config", "gamma must be >= 0")
        if not (0.0 < self.threshold < 1.0):
            raise ValidationError("training-config", "threshold must lie in (0, 1)")


@dataclass
class TrainMeta:
    epochs: int
    learning_rate: float
    batch_size: int
    alpha: float
    gamma: float
    seed: int
    source_dataset_ids: list[str]


@dataclass
class ExpNetModel:
    """Weights of the explainer plus the feature mask it was trained under."""

    input_dim: int
    hidden_dim: int
    W1: np.ndarray  # (hidden_dim, input_dim)
    b1: np.ndarray  # (hidden_dim,)
    w2: np.ndarray  # (hidden_dim,)
    b2: float
    mask: FeatureMask
    train_meta: TrainMeta | None = None

    def validate(self) -> None:
        if self.W1.shape != (self.hidden_dim, self.input_dim):
            raise DimensionError(
                f"W1 has shape {tuple(self.W1.shape)}, expected ({self.hidden_dim}, {self.input_dim})"
            )
        if self.b1.shape != (self.hidden_dim,):
            raise DimensionError(f"b1 has shape {tuple(self.b1.shape)}, expected ({self.hidden_dim},)")
        if self.w2.shape != (self.hidden_dim,):
            raise DimensionError(f"w2 has shape {tuple(self.w2.shape)}, expected ({self.hidden_dim},)")
        for name, arr in (("W1", self.W1), ("b1", self.b1), ("w2", self.w2)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError("finite-parameters", f"{name} has non-finite entries")
        if not math.isfinite(self.b2):
            raise ValidationError("finite-parameters", "b2 is non-finite")
        if self.mask is FeatureMask.FULL and self.input_dim % 2 != 0:
            raise ValidationError(
                "mask-dims",
                f"full mask needs an even input_dim (two directions x H heads), got {self.input_dim}",
            )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, _SIGMOID_EPS, 1.0 - _SIGMOID_EPS)


def _params64(model: ExpNetModel) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    return (
        np.asarray(model.W1, dtype=np.float64),
        np.asarray(model.b1, dtype=np.float64),
        np.asarray(model.w2, dtype=np.float64),
        float(model.b2),
    )


def _feature_values(f) -> np.ndarray:
    return np.asarray(getattr(f, "values", f), dtype=np.float64)


def forward(model: ExpNetModel, f) -> float:
    """Importance probability for one feature vector (or TokenFeatureVector)."""
    values = _feature_values(f)
    if values.shape != (model.input_dim,):
        raise DimensionError(
            f"feature vector has shape {tuple(values.shape)}, expected ({model.input_dim},)"
        )
    w1, b1, w2, b2 = _params64(model)
    return float(_forward_raw(w1, b1, w2, b2, values[None, :])[0])


def _forward_raw(w1, b1, w2, b2, x: np.ndarray) -> np.ndarray:
    z1 = x @ w1.T + b1
    hidden = np.maximum(z1, 0.0)
    z2 = hidden @ w2 + b2
    return _sigmoid(z2)


def focal_loss(y_hat: float, y: int, alpha: float, gamma: float) -> tuple[float, float]:
    """Loss and its derivative with respect to y_hat for one token."""
    loss, dldy = _focal_terms(
        np.asarray([y_hat], dtype=np.float64), np.asarray([y]), alpha, gamma
    )
    return float(loss[0]), float(dldy[0])


def _focal_terms(
    y_hat: np.ndarray, y: np.ndarray, alpha: float, gamma: float
) -> tuple[np.ndarray, np.ndarray]:
    positive = y == 1
    p = np.where(positive, y_hat, 1.0 - y_hat)
    a = np.where(positive, alpha, 1.0 - alpha)
    p = np.clip(p, LOSS_EPS, 1.0 - LOSS_EPS)
    one_minus = 1.0 - p
    log_p = np.log(p)
    loss = -a * one_minus**gamma * log_p
    # d/dp of -a (1-p)^g log p; the first term vanishes at gamma = 0 and the
    # clamp keeps (1-p)^(g-1) finite there.
    dl_dp = a * (gamma * one_minus ** (gamma - 1.0) * log_p - one_minus**gamma / p)
    dl_dy = np.where(positive, dl_dp, -dl_dp)
    return loss, dl_dy


def _batch_loss_and_gradients(
    w1: np.ndarray,
    b1: np.ndarray,
    w2: np.ndarray,
    b2: float,
    x: np.ndarray,
    y: np.ndarray,
    alpha: float,
    gamma: float,
) -> tuple[float, dict[str, np.ndarray | float]]:
    """Mean focal loss over a batch and its parameter gradients."""
    n = x.shape[0]
    z1 = x @ w1.T + b1  # (n, hidden)
    hidden = np.maximum(z1, 0.0)
    z2 = hidden @ w2 + b2  # (n,)
    y_hat = _sigmoid(z2)

    losses, dl_dy = _focal_terms(y_hat, y, alpha, gamma)
    loss = float(np.mean(losses))

    # Mean reduction folds 1/n into the z2 gradient.
    dl_dz2 = dl_dy * y_hat * (1.0 - y_hat) / n  # (n,)
    g_w2 = hidden.T @ dl_dz2
    g_b2 = float(np.sum(dl_dz2))
    d_hidden = np.outer(dl_dz2, w2)  # (n, hidden)
    d_z1 = d_hidden * (z1 > 0.0)
    g_w1 = d_z1.T @ x
    g_b1 = d_z1.sum(axis=0)
    return loss, {"W1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}


def loss_and_gradients(
    model: ExpNetModel, f, y: int, alpha: float, gamma: float
) -> tuple[float, dict[str, np.ndarray | float]]:
    """Focal loss at one token and its analytic gradient for every parameter."""
    w1, b1, w2, b2 = _params64(model)
    x = _feature_values(f)[None, :]
    return _batch_loss_and_gradients(w1, b1, w2, b2, x, np.asarray([y]), alpha, gamma)


def train(
    labeled: Sequence[LabeledToken],
    config: TrainingConfig,
    rng_seed: int | None = None,
    mask: FeatureMask = FeatureMask.FULL,
    source_dataset_ids: Sequence[str] = (),
    epoch_callback: Callable[[int, ExpNetModel], None] | None = None,
) -> ExpNetModel:
    """Train on labeled tokens and return the final-epoch model.

    Tokens, not examples, are the training unit; they are shuffled globally
    once per epoch and the last short batch is kept. Weights start uniform in
    +/- sqrt(6 / (fan_in + fan_out)) per layer, biases at zero. There is no
    early stopping, schedule, or validation-based selection. ``rng_seed``
    overrides ``config.seed`` when given; the seed actually used is recorded
    in train_meta. ``epoch_callback`` receives (epoch index, float64 snapshot)
    after every epoch; snapshots share no buffers with training state.
    """
    config.validate()
    if not labeled:
        raise ValidationError("training-data", "no labeled tokens to train on")
    dims = {tok.feature.values.shape for tok in labeled}
    if len(dims) != 1:
        raise DimensionError(f"feature vectors have mixed shapes {sorted(dims)}")
    input_dim = labeled[0].feature.values.shape[0]

    seed = config.seed if rng_seed is None else rng_seed
    rng = np.random.default_rng(seed)

    lim1 = math.sqrt(6.0 / (input_dim + HIDDEN_DIM))
    lim2 = math.sqrt(6.0 / (HIDDEN_DIM + 1))
    w1 = rng.uniform(-lim1, lim1, size=(HIDDEN_DIM, input_dim))
    b1 = np.zeros(HIDDEN_DIM)
    w2 = rng.uniform(-lim2, lim2, size=HIDDEN_DIM)
    b2 = 0.0

    x = np.stack([tok.feature.values for tok in labeled]).astype(np.float64)
    y = np.asarray([tok.target for tok in labeled], dtype=np.int64)
    n = x.shape[0]

    meta = TrainMeta(
        epochs=config.epochs,
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        alpha=config.alpha,
        gamma=config.gamma,
        seed=seed,
        source_dataset_ids=list(source_dataset_ids),
    )

    def snapshot(dtype) -> ExpNetModel:
        return ExpNetModel(
            input_dim=input_dim,
            hidden_dim=HIDDEN_DIM,
            W1=w1.astype(dtype),
            b1=b1.astype(dtype),
            w2=w2.astype(dtype),
            b2=float(b2),
            mask=mask,
            train_meta=meta,
        )

    m = {"W1": np.zeros_like(w1), "b1": np.zeros_like(b1), "w2": np.zeros_like(w2), "b2": 0.0}
    v = {"W1": np.zeros_like(w1), "b1": np.zeros_like(b1), "w2": np.zeros_like(w2), "b2": 0.0}
    beta1, beta2, eps = config.adam_beta1, config.adam_beta2, config.adam_epsilon
    lr = config.learning_rate
    step = 0

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for batch_no, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            loss, grads = _batch_loss_and_gradients(
                w1, b1, w2, b2, x[idx], y[idx], config.alpha, config.gamma
            )
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch=epoch, batch=batch_no)
            step += 1
            c1 = 1.0 - beta1**step
            c2 = 1.0 - beta2**step
            updated = {}
            for key, param in (("W1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
                g = grads[key]
                m[key] = beta1 * m[key] + (1.0 - beta1) * g
                v[key] = beta2 * v[key] + (1.0 - beta2) * np.square(g)
                updated[key] = param - lr * (m[key] / c1) / (np.sqrt(v[key] / c2) + eps)
            w1, b1, w2 = updated["W1"], updated["b1"], updated["w2"]
            b2 = float(updated["b2"])
        if epoch_callback is not None:
            epoch_callback(epoch, snapshot(np.float64))

    final = snapshot(np.float32)
    final.validate()
    return final


def predict(model: ExpNetModel, trace: AttentionTrace, threshold: float = 0.5) -> Explanation:
    """Score every candidate token and threshold into a binary mask.

    A score >= threshold marks the token important. If nothing clears the
    threshold, the single highest-scoring token is marked instead (earliest
    index on ties), so the mask is never all-zero. Words inherit the max score
    of their subtokens and are marked when any subtoken is marked. Token
    positions without a word id carry score 0.0, which the network itself
    cannot produce.
    """
    feats = extract_features(trace, model.mask)
    x = np.stack([fv.values for fv in feats]).astype(np.float64)
    if x.shape[1] != model.input_dim:
        raise DimensionError(
            f"trace yields features of dim {x.shape[1]}, model expects {model.input_dim}",
            example_id=trace.example_id,
        )
    w1, b1, w2, b2 = _params64(model)
    scores = _forward_raw(w1, b1, w2, b2, x)

    token_hits = scores >= threshold
    if not token_hits.any():
        token_hits[int(np.argmax(scores))] = True

    t = trace.num_tokens
    token_scores = [0.0] * t
    token_bits = [0] * t
    for fv, score, hit in zip(feats, scores, token_hits):
        token_scores[fv.token_index] = float(score)
        token_bits[fv.token_index] = int(hit)

    n_words = trace.num_words
    word_scores = [0.0] * n_words
    word_mask = [0] * n_words
    seen = [False] * n_words
    for fv in feats:
        w = trace.word_ids[fv.token_index]
        s = token_scores[fv.token_index]
        word_scores[w] = s if not seen[w] else max(word_scores[w], s)
        word_mask[w] = max(word_mask[w], token_bits[fv.token_index])
        seen[w] = True

    return Explanation(
        example_id=trace.example_id,
        method_id=EXPNET_METHOD_ID,
        token_scores=token_scores,
        word_scores=word_scores,
        word_mask=word_mask,
    )


def save_model(model: ExpNetModel, path: str | Path) -> None:
    """Write the model as JSON with float32 parameter arrays."""
    model.validate()
    obj = {
        "format_version": FORMAT_VERSION,
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "mask": model.mask.value,
        "W1": [[float(v) for v in row] for row in model.W1.astype(np.float32)],
        "b1": [float(v) for v in model.b1.astype(np.float32)],
        "w2": [float(v) for v in model.w2.astype(np.float32)],
        "b2": float(np.float32(model.b2)),
        "train_meta": None if model.train_meta is None else asdict(model.train_meta),
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ExpNetModel:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path)) from exc
    if obj.get("format_version") != FORMAT_VERSION:
        raise ParseError(
            f"unsupported format_version {obj.get('format_version')!r}, expected {FORMAT_VERSION}",
            path=str(path),
        )
    try:
        meta = obj["train_meta"]
        model = ExpNetModel(
            input_dim=int(obj["input_dim"]),
            hidden_dim=int(obj["hidden_dim"]),
            W1=np.array(obj["W1"], dtype=np.float32),
            b1=np.array(obj["b1"], dtype=np.float32),
            w2=np.array(obj["w2"], dtype=np.float32),
            b2=float(obj["b2"]),
            mask=FeatureMask(obj["mask"]),
            train_meta=None if meta is None else TrainMeta(**meta),
        )
    except (TypeError, KeyError, ValueError) as exc:
        raise ParseError(f"malformed model file: {exc}", path=str(path)) from exc
    model.validate()
    return model
