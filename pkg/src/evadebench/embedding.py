"""Word-vector storage and filtered cosine nearest-neighbor search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional

import numpy as np

DEFAULT_K = 20
DEFAULT_MIN_AUTHORS = 3


class NotInVocabulary(KeyError):
    pass


class VectorFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmbeddingStore:
    """Immutable token -> dense vector map with exact cosine kNN.

    tag distinguishes the pretrained store ("pre") from the fine-tuned
    one ("ft"); anything else is allowed.
    """

    def __init__(self, vocab: Iterable[str], vectors: np.ndarray, tag: str = "other"):
        self.vocab: tuple[str, ...] = tuple(vocab)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.tag = tag
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.vocab):
            raise ValueError("vectors must be (len(vocab), dimension)")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("non-finite vector component")
        self._index = {tok: i for i, tok in enumerate(self.vocab)}
        if len(self._index) != len(self.vocab):
            raise ValueError("duplicate vocab entry")
        norms = np.linalg.norm(self.vectors, axis=1)
        self._norms = norms

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __len__(self) -> int:
        return len(self.vocab)

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise NotInVocabulary(token) from None

    def vector(self, token: str) -> np.ndarray:
        return self.vectors[self.index(token)]

    def get(self, token: str) -> Optional[np.ndarray]:
        i = self._index.get(token)
        return None if i is None else self.vectors[i]


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; zero vectors score 0 by convention."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError("vectors of unequal length")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True)
class AuthorCountTable:
    """token -> number of distinct authors who used it."""
    counts: dict[str, int]

    def __getitem__(self, token: str) -> int:
        return self.counts.get(token, 0)


@dataclass(frozen=True)
class CandidateFilter:
    """Keeps a candidate if it was in the pretrained vocabulary, or was
    used by at least min_authors distinct authors in the evasion corpus."""
    pre_vocab: frozenset[str]
    author_counts: AuthorCountTable
    min_authors: int = DEFAULT_MIN_AUTHORS

    def __post_init__(self):
        if self.min_authors < 0:
            raise ValueError("min_authors must be >= 0")


def apply_filter(candidate: str, filter: CandidateFilter) -> bool:
    lowered = candidate.lower()
    if lowered in filter.pre_vocab:
        return True
    return filter.author_counts[lowered] >= filter.min_authors


def count_authors(corpus: Iterable[tuple[str, str]]) -> AuthorCountTable:
    """Distinct-author counts per lowered whitespace token."""
    seen: dict[str, set[str]] = {}
    for author, text in corpus:
        for tok in text.lower().split():
            seen.setdefault(tok, set()).add(author)
    return AuthorCountTable({tok: len(authors) for tok, authors in seen.items()})


def nearest(store: EmbeddingStore, query: str, k: int = DEFAULT_K,
            filter: Optional[CandidateFilter] = None) -> list[tuple[str, float]]:
    """Top-k vocab tokens by cosine to the query vector, excluding the
    query itself. Ties break by vocab order. Filtered-out candidates are
    skipped before counting k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    qi = store.index(query)
    q = store.vectors[qi]
    qnorm = store._norms[qi]
    if qnorm == 0.0:
        sims = np.zeros(len(store))
    else:
        dots = store.vectors @ q
        denom = store._norms * qnorm
        sims = np.divide(dots, denom, out=np.zeros_like(dots), where=denom != 0.0)
        np.clip(sims, -1.0, 1.0, out=sims)
    # stable sort on -sims: ties fall back to vocab order
    order = np.argsort(-sims, kind="stable")
    out: list[tuple[str, float]] = []
    for idx in order:
        if idx == qi:
            continue
        token = store.vocab[idx]
        if filter is not None and not apply_filter(token, filter):
            continue
        out.append((token, float(sims[idx])))
        if len(out) == k:
            break
    return out


def load_vectors(source: IO[str], tag: str = "other") -> EmbeddingStore:
    """Parse GloVe text format: `token f1 f2 ... fD` per line."""
    vocab: list[str] = []
    rows: list[list[float]] = []
    dim: Optional[int] = None
    for lineno, line in enumerate(source, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split(" ")
        if len(parts) < 2:
            raise VectorFormatError("expected `token f1 ... fD`", lineno)
        token = parts[0]
        try:
            values = [float(x) for x in parts[1:]]
        except ValueError as e:
            raise VectorFormatError(str(e), lineno) from None
        if any(not math.isfinite(v) for v in values):
            raise VectorFormatError("non-finite component", lineno)
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise VectorFormatError(
                f"dimension {len(values)} != {dim} of first line", lineno)
        vocab.append(token)
        rows.append(values)
    if dim is None:
        raise VectorFormatError("empty vector file")
    return EmbeddingStore(vocab, np.array(rows, dtype=np.float64), tag=tag)


def save_vectors(store: EmbeddingStore, sink: IO[str]) -> None:
    """Emit GloVe text format with 6 significant digits."""
    for token, row in zip(store.vocab, store.vectors):
        sink.write(token + " " + " ".join(f"{v:.6g}" for v in row) + "\n")
