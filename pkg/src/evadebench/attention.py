"""Lightweight attention scorer used for attention-based word selection.

The attack only consumes the per-token attention ordering, so a
context-free scorer (softmax over a learned direction in embedding space)
replaces a recurrent encoder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Optional, Sequence

import numpy as np

from .embedding import EmbeddingStore
from .text_core import Document, Label


class EmptyDocument(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class AttentionConfig:
    epochs: int = 200
    learning_rate: float = 0.5
    seed: int = 0


@dataclass
class AttentionModel:
    score_vector: np.ndarray      # u: per-token logit direction
    classifier_vector: np.ndarray  # w: readout over the attention context
    bias: float
    embedding: EmbeddingStore

    def __post_init__(self):
        self.score_vector = np.asarray(self.score_vector, dtype=np.float64)
        self.classifier_vector = np.asarray(self.classifier_vector, dtype=np.float64)
        dim = self.embedding.dimension
        if self.score_vector.shape != (dim,) or self.classifier_vector.shape != (dim,):
            raise ValueError("parameter vectors must match embedding dimension")
        finite = (np.all(np.isfinite(self.score_vector))
                  and np.all(np.isfinite(self.classifier_vector))
                  and np.isfinite(self.bias))
        if not finite:
            raise ValueError("non-finite parameter")


def _token_matrix(model: AttentionModel, doc: Document) -> np.ndarray:
    """Per-token embeddings, zero vector for OOV tokens."""
    if not doc.tokens:
        raise EmptyDocument(doc.id)
    rows = []
    for tok in doc.tokens:
        vec = model.embedding.get(tok.lowered)
        rows.append(vec if vec is not None else np.zeros(model.embedding.dimension))
    return np.array(rows)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def attention_weights(model: AttentionModel, doc: Document) -> np.ndarray:
    """Softmax over token logits u . e_t, aligned to token positions."""
    embeds = _token_matrix(model, doc)
    return _softmax(embeds @ model.score_vector)


def attention_predict(model: AttentionModel, doc: Document) -> float:
    """sigmoid(w . sum_t a_t e_t + b)."""
    embeds = _token_matrix(model, doc)
    attn = _softmax(embeds @ model.score_vector)
    z = float(attn @ embeds @ model.classifier_vector) + model.bias
    if z >= 0:
        return float(1.0 / (1.0 + np.exp(-z)))
    ez = np.exp(z)
    return float(ez / (1.0 + ez))


def _loss_and_grads(u, w, b, embeds, y):
    """Cross-entropy for one doc and gradients w.r.t. (u, w, b)."""
    attn = _softmax(embeds @ u)
    context = attn @ embeds
    z = float(context @ w) + b
    # log(1+exp) computed stably
    loss = float(np.logaddexp(0.0, z) - y * z)
    p = 1.0 / (1.0 + np.exp(-z)) if z >= 0 else np.exp(z) / (1.0 + np.exp(z))
    err = p - y
    g_w = err * context
    g_b = err
    # dz/ds_t = a_t * w.(e_t - c); du = sum_t dz/ds_t * e_t
    proj = embeds @ w - float(context @ w)
    g_u = err * ((attn * proj) @ embeds)
    return loss, g_u, g_w, g_b


def train_attention(docs: Sequence[Document], embedding: EmbeddingStore,
                    cfg: Optional[AttentionConfig] = None) -> AttentionModel:
    """Gradient descent on cross-entropy; deterministic given cfg.seed."""
    cfg = cfg or AttentionConfig()
    labels = {doc.label for doc in docs}
    if Label.OFFENSIVE not in labels or Label.NOT_OFFENSIVE not in labels:
        raise ValueError("need at least one document per class")
    rng = np.random.default_rng(cfg.seed)
    dim = embedding.dimension
    u = rng.normal(scale=0.1, size=dim)
    w = rng.normal(scale=0.1, size=dim)
    b = 0.0
    model = AttentionModel(u, w, b, embedding)
    mats = [_token_matrix(model, doc) for doc in docs]
    ys = [1.0 if doc.label is Label.OFFENSIVE else 0.0 for doc in docs]
    for _ in range(cfg.epochs):
        for i in rng.permutation(len(docs)):
            loss, g_u, g_w, g_b = _loss_and_grads(u, w, b, mats[i], ys[i])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss became non-finite on doc {docs[i].id}")
            u -= cfg.learning_rate * g_u
            w -= cfg.learning_rate * g_w
            b -= cfg.learning_rate * g_b
    return AttentionModel(u, w, b, embedding)


def save_model(model: AttentionModel, sink: IO[str]) -> None:
    json.dump({"dimension": model.embedding.dimension,
               "u": model.score_vector.tolist(),
               "w": model.classifier_vector.tolist(),
               "b": model.bias,
               "embedding_tag": model.embedding.tag}, sink)


def load_model(source: IO[str], embedding: EmbeddingStore) -> AttentionModel:
    data = json.load(source)
    if data["dimension"] != embedding.dimension:
        raise ValueError(f"model dimension {data['dimension']} != "
                         f"embedding dimension {embedding.dimension}")
    return AttentionModel(np.array(data["u"]), np.array(data["w"]),
                          float(data["b"]), embedding)
