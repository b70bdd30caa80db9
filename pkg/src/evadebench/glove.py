"""Co-occurrence counting and GloVe fine-tuning on an evasion corpus."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Sequence

import numpy as np

from .classify import ClassifierHandle
from .embedding import EmbeddingStore

DEFAULT_WINDOW = 5


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.05
    x_max: float = 100.0
    alpha: float = 0.75
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0 or self.x_max <= 0:
            raise ValueError("learning_rate and x_max must be positive")
        if not (0 < self.alpha <= 1):
            raise ValueError("alpha must be in (0, 1]")


class CooccurrenceTable:
    """Sparse symmetric (token_i, token_j) -> weight table."""

    def __init__(self, window: int):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self.entries: dict[tuple[str, str], float] = {}
        self._vocab: dict[str, None] = {}  # insertion-ordered set

    @property
    def vocab(self) -> list[str]:
        return list(self._vocab)

    def add(self, a: str, b: str, weight: float) -> None:
        self._vocab.setdefault(a)
        self._vocab.setdefault(b)
        self.entries[(a, b)] = self.entries.get((a, b), 0.0) + weight
        if a != b:
            self.entries[(b, a)] = self.entries.get((b, a), 0.0) + weight

    def merge(self, other: "CooccurrenceTable") -> None:
        if other.window != self.window:
            raise ValueError("window mismatch")
        for (a, b), w in other.entries.items():
            if a <= b:  # each unordered pair once; add() re-symmetrizes
                self.add(a, b, w)

    def save(self, sink: IO[str]) -> None:
        for (a, b), w in sorted(self.entries.items()):
            if a <= b:
                sink.write(f"{a}\t{b}\t{w!r}\n")

    @classmethod
    def load(cls, source: IO[str], window: int) -> "CooccurrenceTable":
        table = cls(window)
        for line in source:
            line = line.rstrip("\n")
            if not line:
                continue
            a, b, w = line.split("\t")
            table.add(a, b, float(w))
        return table


def build_cooccurrence(corpus: Iterable[Sequence[str]],
                       window: int = DEFAULT_WINDOW) -> CooccurrenceTable:
    """Standard GloVe statistic: each pair within `window` positions adds
    1/distance, symmetrized."""
    table = CooccurrenceTable(window)
    for tokens in corpus:
        for i, tok in enumerate(tokens):
            for d in range(1, window + 1):
                j = i + d
                if j >= len(tokens):
                    break
                table.add(tok, tokens[j], 1.0 / d)
    return table


def _weight(x: float, cfg: TrainConfig) -> float:
    return (x / cfg.x_max) ** cfg.alpha if x < cfg.x_max else 1.0


def glove_loss(main: np.ndarray, context: np.ndarray, bias_main: np.ndarray,
               bias_context: np.ndarray, table: CooccurrenceTable,
               index: dict[str, int], cfg: TrainConfig) -> float:
    """Weighted least-squares objective over all stored entries."""
    total = 0.0
    for (a, b), x in table.entries.items():
        i, j = index[a], index[b]
        diff = float(main[i] @ context[j]) + bias_main[i] + bias_context[j] - math.log(x)
        total += _weight(x, cfg) * diff * diff
    return total


def glove_gradients(main, context, bias_main, bias_context, table, index, cfg):
    """Analytic gradients of glove_loss w.r.t. all four parameter blocks."""
    g_main = np.zeros_like(main)
    g_context = np.zeros_like(context)
    g_bm = np.zeros_like(bias_main)
    g_bc = np.zeros_like(bias_context)
    for (a, b), x in table.entries.items():
        i, j = index[a], index[b]
        diff = float(main[i] @ context[j]) + bias_main[i] + bias_context[j] - math.log(x)
        coeff = 2.0 * _weight(x, cfg) * diff
        g_main[i] += coeff * context[j]
        g_context[j] += coeff * main[i]
        g_bm[i] += coeff
        g_bc[j] += coeff
    return g_main, g_context, g_bm, g_bc


def fine_tune(initial: EmbeddingStore, table: CooccurrenceTable,
              cfg: TrainConfig) -> EmbeddingStore:
    """AdaGrad stochastic updates on the GloVe objective.

    Existing tokens start from their pretrained vector (main == context);
    tokens new to the table get small seeded-random vectors. The returned
    store averages main and context vectors; vocab is the union.
    """
    rng = np.random.default_rng(cfg.seed)
    dim = initial.dimension
    vocab = list(initial.vocab)
    index = {t: i for i, t in enumerate(vocab)}
    for tok in table.vocab:
        if tok not in index:
            index[tok] = len(vocab)
            vocab.append(tok)
    n = len(vocab)

    main = np.empty((n, dim))
    context = np.empty((n, dim))
    n_old = len(initial.vocab)
    main[:n_old] = initial.vectors
    context[:n_old] = initial.vectors
    scale = 0.5 / dim
    main[n_old:] = rng.uniform(-scale, scale, size=(n - n_old, dim))
    context[n_old:] = rng.uniform(-scale, scale, size=(n - n_old, dim))
    bias_main = np.zeros(n)
    bias_context = np.zeros(n)

    # AdaGrad accumulators start at 1.0 so early steps are bounded by lr
    acc_main = np.ones((n, dim))
    acc_context = np.ones((n, dim))
    acc_bm = np.ones(n)
    acc_bc = np.ones(n)

    entries = sorted(table.entries.items())
    lr = cfg.learning_rate
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(entries))
        for e in order:
            (a, b), x = entries[e]
            i, j = index[a], index[b]
            diff = float(main[i] @ context[j]) + bias_main[i] + bias_context[j] \
                - math.log(x)
            coeff = 2.0 * _weight(x, cfg) * diff
            g_i = coeff * context[j]
            g_j = coeff * main[i]
            main[i] -= lr * g_i / np.sqrt(acc_main[i])
            context[j] -= lr * g_j / np.sqrt(acc_context[j])
            bias_main[i] -= lr * coeff / np.sqrt(acc_bm[i])
            bias_context[j] -= lr * coeff / np.sqrt(acc_bc[j])
            acc_main[i] += g_i * g_i
            acc_context[j] += g_j * g_j
            acc_bm[i] += coeff * coeff
            acc_bc[j] += coeff * coeff
        loss = glove_loss(main, context, bias_main, bias_context, table, index, cfg)
        if not math.isfinite(loss):
            raise TrainingDiverged(
                f"non-finite loss after epoch {epoch + 1}; "
                f"lr={lr}, entries={len(entries)}")

    return EmbeddingStore(vocab, (main + context) / 2.0, tag="ft")


def build_evasion_corpus(corpus: Iterable[tuple[str, str]],
                         judges: Sequence[ClassifierHandle],
                         threshold: float = 0.5) -> list[tuple[str, str]]:
    """Keep (author, text) pairs that every judge scores below threshold."""
    kept = []
    for idx, (author, text) in enumerate(corpus):
        try:
            offensive = any(judge.score(text) >= threshold for judge in judges)
        except Exception as e:
            raise RuntimeError(f"judge failed on corpus entry {idx} "
                               f"(author {author!r})") from e
        if not offensive:
            kept.append((author, text))
    return kept
