"""Baseline attacks: visual character perturbation and the whitespace /
"love" transformations."""

from __future__ import annotations

import random
import re
import string
from dataclasses import dataclass
from enum import Enum
from typing import IO

from .defense import NamesList

_LETTER_NAME = re.compile(
    r"^LATIN (SMALL|CAPITAL) LETTER ([A-Z])( WITH .+)?$")


@dataclass(frozen=True)
class VisualNeighborTable:
    """letter -> confusable unicode codepoints. DCES keeps every
    same-letter same-case variant; ECES keeps exactly one per letter."""
    neighbors: dict[str, tuple[int, ...]]

    def __post_init__(self):
        for letter, cps in self.neighbors.items():
            if ord(letter) in cps:
                raise ValueError(f"{letter!r} mapped to itself")

    def get(self, letter: str) -> tuple[int, ...]:
        return self.neighbors.get(letter, ())

    def save(self, sink: IO[str]) -> None:
        for letter in sorted(self.neighbors):
            cps = " ".join(f"{cp:04X}" for cp in self.neighbors[letter])
            sink.write(f"{letter}\t{cps}\n")

    @classmethod
    def load(cls, source: IO[str]) -> "VisualNeighborTable":
        neighbors = {}
        for line in source:
            line = line.rstrip("\n")
            if not line:
                continue
            letter, cps = line.split("\t")
            neighbors[letter] = tuple(int(cp, 16) for cp in cps.split())
        return cls(neighbors)


def build_dces(names: NamesList) -> VisualNeighborTable:
    """Collect, per ASCII letter, every codepoint whose unicode name is
    LATIN SMALL|CAPITAL LETTER X (optionally WITH ...) for the same letter
    and case."""
    neighbors: dict[str, list[int]] = {c: [] for c in string.ascii_letters}
    for cp in sorted(names.descriptions):
        m = _LETTER_NAME.match(names.descriptions[cp])
        if not m:
            continue
        case, base = m.group(1), m.group(2)
        letter = base.lower() if case == "SMALL" else base
        if cp == ord(letter):
            continue
        neighbors[letter].append(cp)
    return VisualNeighborTable({c: tuple(v) for c, v in neighbors.items() if v})


def build_eces(names: NamesList) -> VisualNeighborTable:
    """One designated neighbor per letter: the lowest codepoint among the
    single-diacritic (WITH <one diacritic>) variants, falling back to the
    lowest DCES entry."""
    dces = build_dces(names)
    neighbors: dict[str, tuple[int, ...]] = {}
    for letter, cps in dces.neighbors.items():
        single = [cp for cp in cps
                  if " WITH " in names.descriptions[cp]
                  and " AND " not in names.descriptions[cp]]
        pool = single or list(cps)
        neighbors[letter] = (min(pool),)
    return VisualNeighborTable(neighbors)


def viper(text: str, p: float, table: VisualNeighborTable, seed: int) -> str:
    """Replace each eligible ASCII letter with probability p by a random
    confusable from its table entry."""
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must be in [0,1]")
    rng = random.Random(seed)
    out = []
    for ch in text:
        cps = table.get(ch) if ch in string.ascii_letters else ()
        if cps and rng.random() < p:
            out.append(chr(rng.choice(cps)))
        else:
            out.append(ch)
    return "".join(out)


class GrondahlVariant(Enum):
    ADD_SPACE = "addspace"
    REMOVE_SPACE = "removespace"
    ADD_LOVE = "addlove"
    REMOVE_SPACE_ADD_LOVE = "removespace_addlove"


def grondahl(text: str, variant: GrondahlVariant) -> str:
    if variant is GrondahlVariant.ADD_SPACE:
        return " ".join(text)
    if variant is GrondahlVariant.REMOVE_SPACE:
        return text.replace(" ", "")
    if variant is GrondahlVariant.ADD_LOVE:
        return text + " love"
    if variant is GrondahlVariant.REMOVE_SPACE_ADD_LOVE:
        return text.replace(" ", "") + " love"
    raise ValueError(variant)
