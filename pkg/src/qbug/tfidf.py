"""Small sparse TF-IDF vectorizer with smoothed IDF and L2 normalization."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

# index -> weight, no explicit zeros
SparseVector = dict[int, float]


@dataclass(frozen=True)
class IdfModel:
    vocabulary: dict[str, int]
    idf: tuple[float, ...]
    doc_count: int

    def idf_of(self, term: str) -> float | None:
        i = self.vocabulary.get(term)
        return None if i is None else self.idf[i]


def fit_idf(documents: Sequence[Iterable[str]]) -> IdfModel:
    """idf(t) = ln((1 + N) / (1 + df(t))) + 1; vocabulary in first-seen order."""
    if not documents:
        raise ValueError("cannot fit IDF on an empty document list")
    vocab: dict[str, int] = {}
    df: Counter[str] = Counter()
    for doc in documents:
        terms = list(doc)
        for t in terms:
            if t not in vocab:
                vocab[t] = len(vocab)
        df.update(set(terms))
    n = len(documents)
    idf = [0.0] * len(vocab)
    for t, i in vocab.items():
        idf[i] = math.log((1 + n) / (1 + df[t])) + 1.0
    return IdfModel(vocab, tuple(idf), n)


def transform(doc: Iterable[str], model: IdfModel) -> SparseVector:
    counts = Counter(t for t in doc if t in model.vocabulary)
    raw = {model.vocabulary[t]: c * model.idf[model.vocabulary[t]] for t, c in counts.items()}
    raw = {i: v for i, v in raw.items() if v != 0.0}
    norm = math.sqrt(math.fsum(v * v for v in raw.values()))
    if norm == 0.0:
        return {}
    return {i: v / norm for i, v in sorted(raw.items())}


def cosine(a: SparseVector, b: SparseVector) -> float:
    if not a or not b:
        return 0.0
    na = math.sqrt(math.fsum(v * v for v in a.values()))
    nb = math.sqrt(math.fsum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    # iterate in index order on both sides so cosine(a, b) == cosine(b, a) exactly
    common = sorted(a.keys() & b.keys())
    dot = math.fsum(a[i] * b[i] for i in common)
    return max(-1.0, min(1.0, dot / (na * nb)))


def keyword_tfidf_score(doc: Iterable[str], keywords: Iterable[str], model: IdfModel) -> float:
    """Sum of the document's normalized TF-IDF weights over the given keywords."""
    vec = transform(doc, model)
    if not vec:
        return 0.0
    idx = {model.vocabulary[k] for k in keywords if k in model.vocabulary}
    return math.fsum(vec[i] for i in sorted(idx) if i in vec)
