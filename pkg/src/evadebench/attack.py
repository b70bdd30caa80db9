"""The proposed attack: word selection plus the replacement loop.

Greedy selection orders words by leave-one-out drop in surrogate
probability and removes cumulatively until the label flips; attention
selection orders by attention weight. Each selected word is swapped for
its most similar embedding neighbor that flips the surrogate, falling
back to the neighbor causing the largest probability drop.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Optional, Sequence

from .attention import AttentionModel, attention_weights
from .classify import ClassifierHandle, Label, query_counter
from .embedding import CandidateFilter, EmbeddingStore, nearest
from .text_core import Document, Token, detokenize


class Strategy(Enum):
    GREEDY = "greedy"
    ATTENTION = "attention"


@dataclass(frozen=True)
class SelectionPlan:
    entries: tuple[tuple[int, float], ...]  # (token position, priority)
    strategy: Strategy

    def __post_init__(self):
        positions = [p for p, _ in self.entries]
        if len(set(positions)) != len(positions):
            raise ValueError("duplicate plan positions")
        priorities = [s for _, s in self.entries]
        if any(a < b for a, b in zip(priorities, priorities[1:])):
            raise ValueError("priorities must be non-increasing")

    @property
    def positions(self) -> list[int]:
        return [p for p, _ in self.entries]


EMPTY_GREEDY_PLAN = SelectionPlan((), Strategy.GREEDY)


@dataclass
class AttackConfig:
    surrogate: ClassifierHandle
    embedding: EmbeddingStore
    strategy: Strategy = Strategy.GREEDY
    k: int = 20
    filter: Optional[CandidateFilter] = None
    attention_model: Optional[AttentionModel] = None
    max_replacements: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if (self.strategy is Strategy.ATTENTION) != (self.attention_model is not None):
            raise ValueError("attention_model required iff strategy is attention")


@dataclass
class Substitution:
    position: int
    old: str
    new: str
    score_after: float


@dataclass
class AttackOutcome:
    original: Document
    modified_text: str
    substitutions: list[Substitution]
    success: bool
    surrogate_queries: int
    skipped_positions: list[int] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "id": self.original.id,
            "original_text": self.original.raw,
            "modified_text": self.modified_text,
            "substitutions": [
                {"position": s.position, "old": s.old, "new": s.new,
                 "score_after": s.score_after}
                for s in self.substitutions],
            "success": self.success,
            "surrogate_queries": self.surrogate_queries,
            "skipped_positions": self.skipped_positions,
        }, sort_keys=True)


def _replaceable(tok: Token) -> bool:
    return not tok.is_placeholder and not tok.is_punctuation


def loo_drops(doc: Document, surrogate: ClassifierHandle,
              base_score: Optional[float] = None) -> list[float]:
    """drop[i] = score(doc) - score(doc without token i).

    Placeholder and pure-punctuation positions get -inf so they are never
    selected.
    """
    if not doc.tokens:
        raise ValueError("empty document")
    if base_score is None:
        base_score = surrogate.score(doc.raw)
    drops: list[float] = []
    for i, tok in enumerate(doc.tokens):
        if not _replaceable(tok):
            drops.append(-math.inf)
            continue
        rest = detokenize(doc.tokens[:i] + doc.tokens[i + 1:])
        drops.append(base_score - surrogate.score(rest))
    return drops


def greedy_plan(doc: Document, surrogate: ClassifierHandle,
                base_score: Optional[float] = None) -> SelectionPlan:
    """Order positions by leave-one-out drop, then remove cumulatively,
    re-checking the surrogate, until the label flips. The plan is the
    removed prefix."""
    if base_score is None:
        base_score = surrogate.score(doc.raw)
    if base_score < surrogate.threshold:
        return EMPTY_GREEDY_PLAN
    drops = loo_drops(doc, surrogate, base_score=base_score)
    order = sorted((i for i, d in enumerate(drops) if d != -math.inf),
                   key=lambda i: (-drops[i], i))
    removed: set[int] = set()
    plan: list[tuple[int, float]] = []
    for pos in order:
        removed.add(pos)
        plan.append((pos, drops[pos]))
        rest = detokenize(t for i, t in enumerate(doc.tokens) if i not in removed)
        if surrogate.score(rest) < surrogate.threshold:
            break
    return SelectionPlan(tuple(plan), Strategy.GREEDY)


def attention_plan(doc: Document, attention_model: AttentionModel,
                   surrogate: ClassifierHandle,
                   base_score: Optional[float] = None) -> SelectionPlan:
    """All replaceable positions ordered by attention weight (ties by
    position); consumed lazily by the replacement loop."""
    if base_score is None:
        base_score = surrogate.score(doc.raw)
    if base_score < surrogate.threshold:
        return SelectionPlan((), Strategy.ATTENTION)
    weights = attention_weights(attention_model, doc)
    order = sorted((i for i, tok in enumerate(doc.tokens) if _replaceable(tok)),
                   key=lambda i: (-weights[i], i))
    return SelectionPlan(tuple((i, float(weights[i])) for i in order),
                         Strategy.ATTENTION)


class SkipWord(Exception):
    """Position cannot be attacked (OOV token or no surviving candidates)."""


def replace_word(tokens: list[Token], position: int, cfg: AttackConfig,
                 surrogate: Optional[ClassifierHandle] = None,
                 score_before: Optional[float] = None
                 ) -> tuple[str, float, bool]:
    """Try the filtered top-k neighbors most-similar-first; the first one
    that flips the full text wins. If none flips, keep the one with the
    largest score drop. Mutates tokens[position] to the chosen token.

    Raises SkipWord when the token is OOV or every candidate is filtered.
    """
    surrogate = surrogate or cfg.surrogate
    old = tokens[position]
    if old.lowered not in cfg.embedding:
        raise SkipWord(old.surface)
    candidates = nearest(cfg.embedding, old.lowered, cfg.k, cfg.filter)
    if not candidates:
        raise SkipWord(old.surface)
    if score_before is None:
        score_before = surrogate.score(detokenize(tokens))
    best: Optional[tuple[float, str, float]] = None  # (drop, token, score_after)
    for cand, _sim in candidates:
        trial = list(tokens)
        trial[position] = Token(cand)
        score_after = surrogate.score(detokenize(trial))
        if score_after < surrogate.threshold:
            tokens[position] = Token(cand)
            return cand, score_after, True
        drop = score_before - score_after
        if best is None or drop > best[0]:
            best = (drop, cand, score_after)
    _, chosen, score_after = best
    tokens[position] = Token(chosen)
    return chosen, score_after, False


def run_attack(doc: Document, cfg: AttackConfig) -> AttackOutcome:
    """Full replacement loop; counts every surrogate query made."""
    counter = query_counter(cfg.surrogate)
    base_score = counter.score(doc.raw)
    if base_score < counter.threshold:
        return AttackOutcome(doc, doc.raw, [], success=True,
                             surrogate_queries=counter.count)

    if cfg.strategy is Strategy.GREEDY:
        plan = greedy_plan(doc, counter, base_score=base_score)
    else:
        plan = attention_plan(doc, cfg.attention_model, counter,
                              base_score=base_score)

    tokens = list(doc.tokens)
    substitutions: list[Substitution] = []
    skipped: list[int] = []
    flipped = False
    budget = cfg.max_replacements
    current_score = base_score
    for position in plan.positions:
        if budget is not None and len(substitutions) >= budget:
            break
        old_surface = tokens[position].surface
        try:
            chosen, score_after, flipped = replace_word(
                tokens, position, cfg, surrogate=counter,
                score_before=current_score)
        except SkipWord:
            skipped.append(position)
            continue
        current_score = score_after
        substitutions.append(Substitution(position, old_surface, chosen, score_after))
        if flipped:
            break

    return AttackOutcome(doc, detokenize(tokens), substitutions, success=flipped,
                         surrogate_queries=counter.count,
                         skipped_positions=skipped)


def write_outcomes(outcomes: Sequence[AttackOutcome], sink: IO[str]) -> None:
    for outcome in outcomes:
        sink.write(outcome.to_json() + "\n")
