"""Text normalization and tokenization shared by every classifier."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from qbug.porter import porter_stem

__all__ = [
    "TokenStream",
    "StopwordList",
    "normalize",
    "tokenize",
    "remove_stopwords",
    "porter_stem",
    "stem_tokens",
    "bigrams",
    "detect_negation",
    "contains_phrase",
    "count_phrase",
    "read_word_list",
    "default_stopwords",
    "default_negations",
]

# Anything that is not a letter, digit, whitespace or hyphen becomes a space.
_PUNCT = re.compile(r"[^\w\s-]|_")
_MULTI_HYPHEN = re.compile(r"-{2,}")


@dataclass(frozen=True)
class TokenStream:
    tokens: tuple[str, ...]
    source_len: int = 0

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class StopwordList:
    words: frozenset[str]

    def __post_init__(self):
        if any(w != w.lower() for w in self.words):
            raise ValueError("stopwords must be lowercase")

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def __len__(self) -> int:
        return len(self.words)


def normalize(title: str = "", body: str = "", comments: Iterable[str] = ()) -> str:
    """Join title, body and comments into one lowercase, punctuation-free string.

    Hyphens survive only inside words ("t-gate"); leading, trailing and
    repeated hyphens are dropped.
    """
    raw = " ".join([title or "", body or "", *comments]).lower()
    raw = _PUNCT.sub(" ", raw)
    out = []
    for tok in raw.split():
        tok = _MULTI_HYPHEN.sub("-", tok).strip("-")
        if tok:
            out.append(tok)
    return " ".join(out)


def tokenize(text: str) -> TokenStream:
    return TokenStream(tuple(text.split()), len(text))


def remove_stopwords(ts: TokenStream, sw: StopwordList) -> TokenStream:
    return TokenStream(tuple(t for t in ts if t not in sw), ts.source_len)


def stem_tokens(ts: TokenStream) -> TokenStream:
    return TokenStream(tuple(porter_stem(t) for t in ts), ts.source_len)


def bigrams(ts: Sequence[str] | TokenStream) -> list[str]:
    toks = list(ts)
    return [f"{a} {b}" for a, b in zip(toks, toks[1:])]


def contains_phrase(text: str, phrase: str) -> bool:
    """Whole-token phrase test on single-spaced text."""
    if not phrase:
        return False
    return f" {phrase} " in f" {text} "


def count_phrase(tokens: Sequence[str], phrase: Sequence[str]) -> int:
    """Occurrences (overlapping) of a token sequence inside ``tokens``."""
    n = len(phrase)
    if n == 0:
        return 0
    if n == 1:
        return sum(1 for t in tokens if t == phrase[0])
    phrase = tuple(phrase)
    return sum(
        1 for i in range(len(tokens) - n + 1) if tuple(tokens[i : i + n]) == phrase
    )


def detect_negation(text: str, negation_phrases: Iterable[str]) -> bool:
    return any(contains_phrase(text, p) for p in negation_phrases)


def read_word_list(source: str | Path | Iterable[str]) -> list[str]:
    """Read one entry per line; blank lines and ``#`` comments are skipped."""
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = list(source)
    out = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(line.lower())
    return out


def _bundled(name: str) -> list[str]:
    text = resources.files("qbug.data").joinpath(name).read_text(encoding="utf-8")
    return read_word_list(text.splitlines())


def default_stopwords() -> StopwordList:
    return StopwordList(frozenset(_bundled("stopwords.txt")))


def default_negations() -> list[str]:
    return _bundled("negations.txt")
