"""Accuracy-drop evaluation matrix and embedding diagnostics."""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Callable, Optional, Sequence

from .attack import AttackOutcome
from .classify import ClassifierHandle, Label
from .embedding import EmbeddingStore, nearest
from .text_core import Document, ParseError


class EvaluationError(ValueError):
    pass


def accuracy_on_offensive(classifier: ClassifierHandle,
                          docs: Sequence[Document]) -> float:
    """Percentage of gold-offensive docs predicted offensive (positive
    class recall); gold non-offensive docs are ignored."""
    offensive = [d for d in docs if d.label is Label.OFFENSIVE]
    if not offensive:
        raise EvaluationError("no gold-offensive documents")
    hits = sum(1 for d in offensive if classifier.label(d.raw) is Label.OFFENSIVE)
    return 100.0 * hits / len(offensive)


def delta(baseline: float, modified: float) -> float:
    """Drop in accuracy, in percentage points (may be negative)."""
    return baseline - modified


@dataclass
class MatrixCell:
    baseline: Optional[float] = None
    modified: Optional[float] = None
    drop: Optional[float] = None
    excluded: bool = False       # diagonal: surrogate == target
    error: Optional[str] = None


@dataclass
class EvaluationReport:
    surrogates: list[str]
    targets: list[str]
    baselines: dict[str, float]
    cells: dict[tuple[str, str], MatrixCell]
    metadata: dict

    def row_average(self, surrogate: str) -> Optional[float]:
        drops = [c.drop for (s, _), c in self.cells.items()
                 if s == surrogate and c.drop is not None]
        return sum(drops) / len(drops) if drops else None

    def column_average(self, target: str) -> Optional[float]:
        drops = [c.drop for (_, t), c in self.cells.items()
                 if t == target and c.drop is not None]
        return sum(drops) / len(drops) if drops else None

    def _cell_text(self, cell: MatrixCell) -> str:
        if cell.excluded:
            return "-"
        if cell.error is not None:
            return "ERR"
        return f"{cell.drop:.1f}"

    def to_tsv(self, sink: IO[str]) -> None:
        sink.write("surrogate\t" + "\t".join(self.targets) + "\tavg\n")
        for s in self.surrogates:
            row = [self._cell_text(self.cells[(s, t)]) for t in self.targets]
            avg = self.row_average(s)
            row.append("-" if avg is None else f"{avg:.1f}")
            sink.write(s + "\t" + "\t".join(row) + "\n")
        col_avgs = []
        for t in self.targets:
            avg = self.column_average(t)
            col_avgs.append("-" if avg is None else f"{avg:.1f}")
        sink.write("avg\t" + "\t".join(col_avgs) + "\t\n")

    def to_markdown(self, sink: IO[str]) -> None:
        header = ["surrogate"] + self.targets + ["avg"]
        sink.write("| " + " | ".join(header) + " |\n")
        sink.write("|" + "---|" * len(header) + "\n")
        for s in self.surrogates:
            row = [s] + [self._cell_text(self.cells[(s, t)]) for t in self.targets]
            avg = self.row_average(s)
            row.append("-" if avg is None else f"{avg:.1f}")
            sink.write("| " + " | ".join(row) + " |\n")

    def to_json(self, sink: IO[str]) -> None:
        json.dump({
            "surrogates": self.surrogates,
            "targets": self.targets,
            "baselines": self.baselines,
            "cells": [
                {"surrogate": s, "target": t, "baseline": c.baseline,
                 "modified": c.modified, "drop": c.drop,
                 "excluded": c.excluded, "error": c.error}
                for (s, t), c in sorted(self.cells.items())],
            "metadata": self.metadata,
        }, sink, sort_keys=True)


def run_matrix(docs: Sequence[Document],
               surrogates: Sequence[ClassifierHandle],
               targets: Sequence[ClassifierHandle],
               attack_factory: Callable[[ClassifierHandle],
                                        Callable[[Document], AttackOutcome]],
               parallelism: int = 1,
               metadata: Optional[dict] = None) -> EvaluationReport:
    """Attack every gold-offensive doc once per surrogate and measure
    each target's accuracy drop on the modified texts. Diagonal cells
    (surrogate == target) are excluded per the reporting convention."""
    if not surrogates or not targets:
        raise EvaluationError("need at least one surrogate and one target")
    offensive = [d for d in docs if d.label is Label.OFFENSIVE]
    if not offensive:
        raise EvaluationError("no gold-offensive documents")

    meta = dict(metadata or {})
    meta.setdefault("num_offensive_docs", len(offensive))
    meta.setdefault("config_hash", hashlib.sha256(
        json.dumps({"surrogates": [s.name for s in surrogates],
                    "targets": [t.name for t in targets],
                    "docs": [d.id for d in offensive]},
                   sort_keys=True).encode()).hexdigest())

    baselines: dict[str, float] = {}
    cells: dict[tuple[str, str], MatrixCell] = {}
    for target in targets:
        try:
            baselines[target.name] = accuracy_on_offensive(target, offensive)
        except Exception as e:  # recorded per cell below
            baselines[target.name] = None
            for surrogate in surrogates:
                cells[(surrogate.name, target.name)] = MatrixCell(error=str(e))

    for surrogate in surrogates:
        attack = attack_factory(surrogate)
        if parallelism > 1:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                outcomes = list(pool.map(attack, offensive))
        else:
            outcomes = [attack(d) for d in offensive]
        modified = [
            Document.from_text(d.id, o.modified_text, label=d.label, author=d.author)
            for d, o in zip(offensive, outcomes)]
        assert len(modified) == len(offensive)
        for target in targets:
            key = (surrogate.name, target.name)
            if key in cells:
                continue
            if target.name == surrogate.name:
                cells[key] = MatrixCell(excluded=True,
                                        baseline=baselines[target.name])
                continue
            try:
                after = accuracy_on_offensive(target, modified)
            except Exception as e:
                cells[key] = MatrixCell(baseline=baselines[target.name],
                                        error=str(e))
                continue
            base = baselines[target.name]
            cells[key] = MatrixCell(baseline=base, modified=after,
                                    drop=delta(base, after))

    return EvaluationReport(
        surrogates=[s.name for s in surrogates],
        targets=[t.name for t in targets],
        baselines=baselines, cells=cells, metadata=meta)


def first_evasive_rank(probe: str, store: EmbeddingStore,
                       judge: ClassifierHandle, k: int = 20) -> Optional[int]:
    """1-based rank of the first top-k neighbor the judge deems
    non-offensive when scored as a single token; None if none qualifies."""
    for rank, (candidate, _sim) in enumerate(nearest(store, probe, k), start=1):
        if judge.label(candidate) is Label.NOT_OFFENSIVE:
            return rank
    return None


def avg_first_evasive(probes: Sequence[str], store: EmbeddingStore,
                      judge: ClassifierHandle,
                      k: int = 20) -> tuple[float, int]:
    """Mean first-evasive rank over probes that have one; also returns
    how many probes had none."""
    if not probes:
        raise EvaluationError("no probes")
    ranks = [first_evasive_rank(p, store, judge, k) for p in probes]
    found = [r for r in ranks if r is not None]
    if not found:
        raise EvaluationError("no probe had an evasive neighbor")
    return sum(found) / len(found), len(ranks) - len(found)


class Readability(Enum):
    EASY = "easy"
    SOME_DIFFICULTY = "some_difficulty"
    HARD = "hard"


class MeaningVote(Enum):
    SAME = "same"
    PARTIAL = "partial"
    DIFFERENT = "different"


@dataclass(frozen=True)
class ReadabilityRecord:
    doc_id: str
    annotator: str
    readability: Readability
    meaning: MeaningVote


# tie-break preference: more readable / more meaning-preserving wins
_PREFERENCE = {
    Readability.EASY: 0, Readability.SOME_DIFFICULTY: 1, Readability.HARD: 2,
    MeaningVote.SAME: 0, MeaningVote.PARTIAL: 1, MeaningVote.DIFFERENT: 2,
}


def majority_vote(votes: Sequence) -> object:
    """Modal category; ties resolve to the preferred (more readable /
    more meaning-preserving) category among those tied."""
    if not votes:
        raise ValueError("no votes")
    counts: dict = {}
    for v in votes:
        counts[v] = counts.get(v, 0) + 1
    return min(counts, key=lambda v: (-counts[v], _PREFERENCE[v]))


def load_readability_records(source: IO[str]) -> list[ReadabilityRecord]:
    """TSV: doc_id TAB annotator TAB readability TAB meaning."""
    records = []
    for lineno, line in enumerate(source, start=1):
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(f"expected 4 columns, got {len(parts)}", lineno)
        doc_id, annotator, readability, meaning = parts
        try:
            records.append(ReadabilityRecord(
                doc_id, annotator, Readability(readability), MeaningVote(meaning)))
        except ValueError as e:
            raise ParseError(str(e), lineno) from None
    return records
