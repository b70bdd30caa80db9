import io
import re
import string
import unicodedata

import numpy as np
import pytest

from evadebench.classify import ClassifierHandle
from evadebench.defense import NamesList, UnigramDictionary, load_nameslist
from evadebench.embedding import EmbeddingStore

_CONFUSABLE_RANGES = [(0xC0, 0x250), (0x1E00, 0x1F00), (0xA720, 0xA800)]
_LATIN_NAME = re.compile(r"^LATIN (SMALL|CAPITAL) LETTER [A-Z]( WITH [A-Z ]+)?$")


def _nameslist_lines():
    """NamesList-format data covering every ASCII letter's latin variants,
    built from the system unicode database."""
    lines = ["@@\t00C0\tLatin-1 Supplement and friends\t0000"]
    for lo, hi in _CONFUSABLE_RANGES:
        for cp in range(lo, hi):
            try:
                name = unicodedata.name(chr(cp))
            except ValueError:
                continue
            if _LATIN_NAME.match(name):
                lines.append(f"{cp:04X}\t{name}")
                lines.append("\t* annotation line, must be ignored")
    return lines


@pytest.fixture(scope="session")
def nameslist_text() -> str:
    return "\n".join(_nameslist_lines()) + "\n"


@pytest.fixture(scope="session")
def nameslist(nameslist_text) -> NamesList:
    return load_nameslist(io.StringIO(nameslist_text))


@pytest.fixture(scope="session")
def unigram_dict() -> UnigramDictionary:
    words = {
        "you": 500, "are": 400, "a": 900, "the": 1000, "moron": 40,
        "idiot": 35, "love": 300, "no": 450, "evil": 60, "total": 80,
        "get": 300, "out": 250, "of": 700, "here": 200, "shameless": 10,
        "pig": 50, "taste": 30, "like": 320, "all": 340, "two": 150,
        "them": 260, "is": 800, "this": 600, "what": 380, "not": 560,
        "stupid": 45, "so": 310, "very": 240, "really": 220, "such": 130,
    }
    return UnigramDictionary(words)


def make_store(vectors: dict[str, list[float]], tag="other") -> EmbeddingStore:
    vocab = list(vectors)
    return EmbeddingStore(vocab, np.array([vectors[t] for t in vocab],
                                          dtype=float), tag=tag)


def scripted_classifier(scores: dict[str, float], default: float = 0.0,
                        name="scripted", threshold=0.5) -> ClassifierHandle:
    """Fixed text -> score map with a default for unknown texts."""
    return ClassifierHandle(name=name, threshold=threshold,
                            scorer=lambda text: scores.get(text, default))


def constant_classifier(value: float, name="constant") -> ClassifierHandle:
    return ClassifierHandle(name=name, scorer=lambda text: value)
