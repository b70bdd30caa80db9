"""Classifier scoring contract, built-in scorers, and the remote client."""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import requests

from .embedding import EmbeddingStore
from .text_core import Label, tokenize

DEFAULT_THRESHOLD = 0.5
BATCH_LIMIT = 64
ENDPOINT_ENV = "EVADE_BENCH_ENDPOINT"


class RemoteError(RuntimeError):
    def __init__(self, endpoint: str, cause: str):
        self.endpoint = endpoint
        super().__init__(f"remote classifier {endpoint}: {cause}")


@dataclass
class ClassifierHandle:
    """Opaque scorer mapping text to offensive probability in [0,1]."""
    name: str
    scorer: Callable[[str], float]
    threshold: float = DEFAULT_THRESHOLD

    def score(self, text: str) -> float:
        value = float(self.scorer(text))
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"{self.name}: score {value} outside [0,1]")
        return value

    def score_batch(self, texts: Sequence[str]) -> list[float]:
        return [self.score(t) for t in texts]

    def label(self, text: str) -> Label:
        return label(self, text)


def label(handle: ClassifierHandle, text: str) -> Label:
    """Offensive iff score >= threshold (boundary counts as offensive)."""
    if handle.score(text) >= handle.threshold:
        return Label.OFFENSIVE
    return Label.NOT_OFFENSIVE


def lexicon_classifier(lexicon: set[str], name: str = "lexicon") -> ClassifierHandle:
    """Scores 1.0 if any lowered token is in the lexicon, else 0.0."""
    def scorer(text: str) -> float:
        return 1.0 if any(t.lowered in lexicon for t in tokenize(text)) else 0.0
    return ClassifierHandle(name=name, scorer=scorer)


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    ez = np.exp(z)
    return float(ez / (1.0 + ez))


@dataclass
class LinearModel:
    """Logistic regression over mean-of-token-embedding features."""
    weights: np.ndarray  # dimension + 1, bias last
    embedding: EmbeddingStore

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.embedding.dimension + 1,):
            raise ValueError("weights must have embedding dimension + 1 entries")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("non-finite weight")

    def features(self, text: str) -> np.ndarray:
        vecs = [self.embedding.vector(t.lowered) for t in tokenize(text)
                if t.lowered in self.embedding]
        if not vecs:
            return np.zeros(self.embedding.dimension)
        return np.mean(vecs, axis=0)

    def score(self, text: str) -> float:
        f = self.features(text)
        return _sigmoid(float(f @ self.weights[:-1]) + self.weights[-1])

    def handle(self, name: str = "linear") -> ClassifierHandle:
        return ClassifierHandle(name=name, scorer=self.score)


def train_linear(docs, embedding: EmbeddingStore, epochs: int = 200,
                 lr: float = 0.5, seed: int = 0) -> LinearModel:
    """SGD logistic regression on labeled Documents."""
    labels = {doc.label for doc in docs}
    if Label.OFFENSIVE not in labels or Label.NOT_OFFENSIVE not in labels:
        raise ValueError("need at least one document per class")
    model = LinearModel(np.zeros(embedding.dimension + 1), embedding)
    feats = [model.features(doc.raw) for doc in docs]
    ys = [1.0 if doc.label is Label.OFFENSIVE else 0.0 for doc in docs]
    rng = np.random.default_rng(seed)
    w = model.weights
    for _ in range(epochs):
        for i in rng.permutation(len(docs)):
            f = feats[i]
            p = _sigmoid(float(f @ w[:-1]) + w[-1])
            err = p - ys[i]
            w[:-1] -= lr * err * f
            w[-1] -= lr * err
    return model


def remote_classifier(endpoint: Optional[str] = None, timeout: float = 10.0,
                      retries: int = 2, bearer_token: Optional[str] = None,
                      name: Optional[str] = None) -> ClassifierHandle:
    """Client for the score protocol: POST <endpoint>/score with
    {"texts": [...]} expecting {"scores": [...]} of the same length."""
    if endpoint is None:
        endpoint = os.environ.get(ENDPOINT_ENV)
    if not endpoint:
        raise ValueError(f"no endpoint given and {ENDPOINT_ENV} unset")
    url = endpoint.rstrip("/") + "/score"
    headers = {"Content-Type": "application/json"}
    if bearer_token:
        headers["Authorization"] = f"Bearer {bearer_token}"
    session = requests.Session()

    def request_scores(texts: Sequence[str]) -> list[float]:
        last_error = "no attempt made"
        for _ in range(retries + 1):
            try:
                resp = session.post(url, json={"texts": list(texts)},
                                    headers=headers, timeout=timeout)
            except requests.RequestException as e:
                last_error = str(e)
                continue
            if resp.status_code != 200:
                last_error = f"HTTP {resp.status_code}"
                continue
            try:
                body = resp.json()
                scores = body["scores"]
            except (ValueError, KeyError, TypeError) as e:
                raise RemoteError(endpoint, f"malformed response: {e}")
            if len(scores) != len(texts):
                raise RemoteError(
                    endpoint, f"got {len(scores)} scores for {len(texts)} texts")
            out = []
            for s in scores:
                s = float(s)
                if not (0.0 <= s <= 1.0):
                    raise RemoteError(endpoint, f"score {s} outside [0,1]")
                out.append(s)
            return out
        raise RemoteError(endpoint, f"failed after {retries + 1} attempts: {last_error}")

    def batch(texts: Sequence[str]) -> list[float]:
        out: list[float] = []
        for start in range(0, len(texts), BATCH_LIMIT):
            out.extend(request_scores(texts[start:start + BATCH_LIMIT]))
        return out

    handle = ClassifierHandle(name=name or f"remote:{endpoint}",
                              scorer=lambda text: request_scores([text])[0])
    handle.score_batch = batch  # type: ignore[method-assign]
    return handle


class QueryCounter(ClassifierHandle):
    """Pass-through handle exposing a thread-safe count of score() calls."""

    def __init__(self, inner: ClassifierHandle):
        self.inner = inner
        self._count = 0
        self._lock = threading.Lock()
        super().__init__(name=inner.name, scorer=self._scorer,
                         threshold=inner.threshold)

    def _scorer(self, text: str) -> float:
        with self._lock:
            self._count += 1
        return self.inner.score(text)

    @property
    def count(self) -> int:
        with self._lock:
            return self._count


def query_counter(handle: ClassifierHandle) -> QueryCounter:
    return QueryCounter(handle)


def cached(handle: ClassifierHandle) -> ClassifierHandle:
    """Optional memo layer keyed by exact text. Off by default everywhere."""
    memo: dict[str, float] = {}

    def scorer(text: str) -> float:
        if text not in memo:
            memo[text] = handle.score(text)
        return memo[text]

    return ClassifierHandle(name=f"{handle.name}+cache", scorer=scorer,
                            threshold=handle.threshold)


def save_linear(model: LinearModel, path: str, embedding_path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"weights": model.weights.tolist(),
                   "embedding": embedding_path}, f)


def load_linear(path: str, embedding: Optional[EmbeddingStore] = None) -> LinearModel:
    from .embedding import load_vectors
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if embedding is None:
        with open(data["embedding"], encoding="utf-8") as vf:
            embedding = load_vectors(vf)
    return LinearModel(np.array(data["weights"]), embedding)
