"""Shielding preprocessors: unicode lookalike normalization via the
unicode NamesList, and unigram word segmentation."""

from __future__ import annotations

import math
import re
import string
from dataclasses import dataclass
from functools import lru_cache
from typing import IO, Optional

from .text_core import ParseError

_LETTER_REF = re.compile(r"\bLETTER ([A-Z])\b")
_ASCII_PASSTHROUGH = set(string.ascii_letters + string.digits
                         + string.punctuation + string.whitespace)


@dataclass(frozen=True)
class NamesList:
    """codepoint -> uppercase unicode character description."""
    descriptions: dict[int, str]


def load_nameslist(source: IO[str]) -> NamesList:
    """Parse NamesList.txt data lines of the form `XXXX TAB NAME`; all
    annotation lines (starting with TAB, '@', ';', '#') are ignored."""
    descriptions: dict[int, str] = {}
    for lineno, line in enumerate(source, start=1):
        line = line.rstrip("\n")
        if not line or line[0] in ("\t", "@", ";", "#"):
            continue
        if "\t" not in line:
            continue
        hex_part, name = line.split("\t", 1)
        try:
            cp = int(hex_part, 16)
        except ValueError:
            raise ParseError(f"bad codepoint hex {hex_part!r}", lineno) from None
        name = name.strip()
        if name:
            descriptions[cp] = name
    return NamesList(descriptions)


def shield_unicode(text: str, names: NamesList) -> str:
    """Map unicode lookalikes back to base letters.

    A non-ASCII character whose description contains "LETTER X" becomes x
    (lowercase if the description says SMALL, uppercase if CAPITAL);
    characters without a match are kept unchanged.
    """
    out = []
    for ch in text:
        if ch in _ASCII_PASSTHROUGH:
            out.append(ch)
            continue
        desc = names.descriptions.get(ord(ch))
        m = _LETTER_REF.search(desc) if desc else None
        if m is None:
            out.append(ch)
        elif "CAPITAL" in desc:
            out.append(m.group(1))
        else:
            out.append(m.group(1).lower())
    return "".join(out)


class UnigramDictionary:
    """word -> frequency counts backing the segmentation model."""

    def __init__(self, counts: dict[str, int]):
        if any(c <= 0 for c in counts.values()):
            raise ValueError("counts must be positive")
        self.counts = dict(counts)
        self.total = sum(counts.values())

    def __contains__(self, word: str) -> bool:
        return word in self.counts

    def cost(self, word: str) -> float:
        """-log probability; unknown words get 1/(total * 10^len)."""
        count = self.counts.get(word)
        if count is not None:
            return -math.log(count / self.total)
        return math.log(self.total) + len(word) * math.log(10)

    @classmethod
    def load(cls, source: IO[str]) -> "UnigramDictionary":
        counts: dict[str, int] = {}
        for lineno, line in enumerate(source, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            try:
                word, count = line.split("\t")
                counts[word] = int(count)
            except ValueError:
                raise ParseError(f"expected `word TAB count`: {line!r}",
                                 lineno) from None
        return cls(counts)


def segment(text: str, dictionary: UnigramDictionary) -> list[str]:
    """Maximum-likelihood split under the unigram model, by dynamic
    programming over suffixes. Ties prefer the longer first word."""
    n = len(text)
    # best[i] = minimal cost of segmenting text[i:]; split[i] = end of first word
    best = [0.0] * (n + 1)
    split = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        best[i] = math.inf
        for j in range(n, i, -1):  # longest candidate first wins ties
            c = dictionary.cost(text[i:j].lower()) + best[j]
            if c < best[i]:
                best[i] = c
                split[i] = j
    words = []
    i = 0
    while i < n:
        words.append(text[i:split[i]])
        i = split[i]
    return words


_SPACE_UNDO_THRESHOLD = 0.8


def shield_pipeline(text: str, names: NamesList, dictionary: UnigramDictionary,
                    undo_addspace: bool = True,
                    segment_unknown: bool = True) -> str:
    """shield_unicode, then undo single-character spacing artifacts when
    at least 80% of tokens are single characters, then re-segment any
    token absent from the dictionary."""
    text = shield_unicode(text, names)
    chunks = text.split()
    if not chunks:
        return text
    if undo_addspace and len(chunks) > 1:
        single = sum(1 for c in chunks if len(c) == 1)
        if single / len(chunks) >= _SPACE_UNDO_THRESHOLD:
            chunks = ["".join(chunks)]
    if segment_unknown:
        out: list[str] = []
        for chunk in chunks:
            if chunk.lower() in dictionary:
                out.append(chunk)
            else:
                out.extend(segment(chunk, dictionary))
        chunks = out
    return " ".join(chunks)
