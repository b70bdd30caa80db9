"""Tokenization, detokenization, and dataset/lexicon loading."""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Optional

PLACEHOLDERS = {"@USER", "URL"}
_PUNCT = set(string.punctuation)


class Label(Enum):
    OFFENSIVE = "OFF"
    NOT_OFFENSIVE = "NOT"


class ParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Token:
    surface: str
    is_placeholder: bool = False

    def __post_init__(self):
        if any(c.isspace() for c in self.surface):
            raise ValueError(f"token surface contains whitespace: {self.surface!r}")

    @property
    def lowered(self) -> str:
        return self.surface.lower()

    @property
    def is_punctuation(self) -> bool:
        return all(c in _PUNCT for c in self.surface) and bool(self.surface)


@dataclass(frozen=True)
class Document:
    id: str
    raw: str
    tokens: tuple[Token, ...]
    label: Optional[Label] = None
    author: Optional[str] = None

    @classmethod
    def from_text(cls, id: str, raw: str, label: Optional[Label] = None,
                  author: Optional[str] = None) -> "Document":
        return cls(id=id, raw=raw, tokens=tuple(tokenize(raw)), label=label,
                   author=author)


def tokenize(raw: str) -> list[Token]:
    """Whitespace split with leading/trailing ASCII punctuation broken out.

    "@USER" and "URL" chunks become placeholder tokens and are kept whole.
    Internal punctuation (apostrophes etc.) stays inside the token.
    """
    tokens: list[Token] = []
    for chunk in raw.split():
        tokens.extend(_split_chunk(chunk))
    return tokens


def _split_chunk(chunk: str) -> list[Token]:
    # placeholder check re-runs after each strip so "@USER!" keeps its marker
    if chunk in PLACEHOLDERS:
        return [Token(chunk, is_placeholder=True)]
    if len(chunk) > 1 and chunk[-1] in _PUNCT:
        return _split_chunk(chunk[:-1]) + [Token(chunk[-1])]
    if len(chunk) > 1 and chunk[0] in _PUNCT:
        return [Token(chunk[0])] + _split_chunk(chunk[1:])
    return [Token(chunk)]


def detokenize(tokens: Iterable[Token]) -> str:
    """Join tokens with spaces; pure-punctuation tokens attach to the
    preceding token so that tokenize(detokenize(t)) == t."""
    parts: list[str] = []
    for tok in tokens:
        if parts and tok.is_punctuation and not tok.is_placeholder:
            parts[-1] += tok.surface
        else:
            parts.append(tok.surface)
    return " ".join(parts)


def _parse_label(text: str, line: int) -> Optional[Label]:
    if text == "OFF":
        return Label.OFFENSIVE
    if text == "NOT":
        return Label.NOT_OFFENSIVE
    if text == "-":
        return None
    raise ParseError(f"unknown label {text!r} (expected OFF/NOT/-)", line)


def load_dataset(source: IO[str], format: str) -> list[Document]:
    """Read Documents from a TSV stream.

    format "olid": header line; columns id, tweet, subtask_a (extra columns
    ignored). format "plain": no header; id TAB label TAB text with an
    optional author column; label "-" means unlabeled.
    """
    if format not in ("olid", "plain"):
        raise ValueError(f"unknown dataset format: {format!r}")
    docs: list[Document] = []
    lines = iter(enumerate(source, start=1))

    id_col, text_col, label_col = 0, 1, 2
    if format == "olid":
        try:
            _, header = next(lines)
        except StopIteration:
            return []
        cols = header.rstrip("\n").split("\t")
        if len(cols) < 3:
            raise ParseError("OLID header needs at least 3 columns", 1)
        if "id" in cols and "tweet" in cols and "subtask_a" in cols:
            id_col = cols.index("id")
            text_col = cols.index("tweet")
            label_col = cols.index("subtask_a")

    for lineno, line in lines:
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        needed = max(id_col, text_col, label_col) + 1
        if len(fields) < needed:
            raise ParseError(f"expected at least {needed} columns, got {len(fields)}",
                             lineno)
        if format == "olid":
            doc_id, text, raw_label = fields[id_col], fields[text_col], fields[label_col]
            author = None
        else:
            doc_id, raw_label, text = fields[0], fields[1], fields[2]
            author = fields[3] if len(fields) > 3 else None
        docs.append(Document.from_text(doc_id, text, _parse_label(raw_label, lineno),
                                       author))
    return docs


def write_dataset(docs: Iterable[Document], sink: IO[str]) -> None:
    """Emit Documents in the plain TSV format accepted by load_dataset."""
    for doc in docs:
        label = doc.label.value if doc.label is not None else "-"
        row = [doc.id, label, doc.raw]
        if doc.author is not None:
            row.append(doc.author)
        sink.write("\t".join(row) + "\n")


def load_lexicon(source: IO[str]) -> set[str]:
    """One offensive word per line; '#' comments and blank lines ignored."""
    words: set[str] = set()
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if any(c.isspace() for c in line):
            raise ParseError(f"lexicon entry contains whitespace: {line!r}", lineno)
        words.add(line.lower())
    return words
