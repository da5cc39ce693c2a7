"""Ruleset definition, validation, persistence and compilation.

A :class:`Lexicon` is the editable, provenance-tagged form that round-trips
through YAML. :func:`compile_lexicon` turns it into the lowercase, stemmed,
hash-indexed :class:`CompiledLexicon` the classifiers read.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import yaml

from qbug.corpus import atomic_write_text
from qbug.textprep import (
    StopwordList,
    default_stopwords,
    normalize,
    porter_stem,
    remove_stopwords,
    tokenize,
)

SEVERITIES = ("Low", "Medium", "High", "Critical")
SOURCES = ("paper", "curated")
BUG_TYPES = ("Quantum", "Classical", "Uncategorized")


class LexiconError(ValueError):
    """Invalid ruleset; ``path`` is the dotted key path of the offending entry."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class WeightedTerm:
    term: str
    weight: float = 1
    source: str = "curated"


@dataclass(frozen=True)
class LabelRule:
    label: str
    target: str
    source: str = "curated"


@dataclass(frozen=True)
class BugTypeLexicon:
    quantum_unigrams: tuple[WeightedTerm, ...]
    classical_unigrams: tuple[WeightedTerm, ...]
    quantum_bigrams: tuple[WeightedTerm, ...]
    classical_bigrams: tuple[WeightedTerm, ...]
    negation_phrases: tuple[str, ...] = ()

    def swapped(self) -> "BugTypeLexicon":
        """Same ruleset with the quantum and classical sides exchanged."""
        return BugTypeLexicon(
            self.classical_unigrams,
            self.quantum_unigrams,
            self.classical_bigrams,
            self.quantum_bigrams,
            self.negation_phrases,
        )


@dataclass(frozen=True)
class CategoryLexicon:
    categories: tuple[str, ...]
    keywords: dict[str, tuple[WeightedTerm, ...]]
    label_map: tuple[LabelRule, ...] = ()
    fallback: str = "Uncategorized"

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return (*self.categories, self.fallback)


@dataclass(frozen=True)
class QualityLexicon:
    attribute_keywords: dict[str, tuple[WeightedTerm, ...]]
    priority: tuple[str, ...]
    tfidf_threshold: float = 0.1
    label_hints: tuple[LabelRule, ...] = ()
    fallback: str = "Miscellaneous"

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return (*self.attribute_keywords, self.fallback)


@dataclass(frozen=True)
class SeverityLexicon:
    keywords: dict[str, tuple[WeightedTerm, ...]]
    label_map: tuple[LabelRule, ...] = ()
    comment_medium_threshold: int = 10
    comment_high_threshold: int = 20
    security_labels: tuple[str, ...] = ("security",)
    security_terms: tuple[str, ...] = ("vulnerability",)
    closed_states: tuple[str, ...] = ("closed", "resolved", "fixed")

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return SEVERITIES


@dataclass(frozen=True)
class QuantumSubtype:
    name: str
    weight: float
    keywords: tuple[str, ...]


@dataclass(frozen=True)
class QuantumSubtypeLexicon:
    categories: tuple[QuantumSubtype, ...]
    tfidf_scale: float = 2.0
    fallback: str = "Unclassified"

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return (*(c.name for c in self.categories), self.fallback)


@dataclass(frozen=True)
class Lexicon:
    bug_type: BugTypeLexicon
    category: CategoryLexicon
    quality: QualityLexicon
    severity: SeverityLexicon
    quantum: QuantumSubtypeLexicon

    def vocabularies(self) -> dict[str, tuple[str, ...]]:
        """Label vocabulary per dimension, in declaration order."""
        return {
            "bug_type": BUG_TYPES,
            "category": self.category.vocabulary,
            "quality_attribute": self.quality.vocabulary,
            "severity": SEVERITIES,
            "quantum_subtype": self.quantum.vocabulary,
        }

    def restricted(self, sources: Iterable[str]) -> "Lexicon":
        """Copy keeping only entries whose provenance is in ``sources``.

        Quantum subtype rows carry no per-entry provenance and are kept.
        """
        keep = set(sources)

        def terms(ts):
            return tuple(t for t in ts if t.source in keep)

        def rules(rs):
            return tuple(r for r in rs if r.source in keep)

        bt = self.bug_type
        return Lexicon(
            BugTypeLexicon(
                terms(bt.quantum_unigrams),
                terms(bt.classical_unigrams),
                terms(bt.quantum_bigrams),
                terms(bt.classical_bigrams),
                bt.negation_phrases,
            ),
            CategoryLexicon(
                self.category.categories,
                {k: terms(v) for k, v in self.category.keywords.items()},
                rules(self.category.label_map),
                self.category.fallback,
            ),
            QualityLexicon(
                {k: terms(v) for k, v in self.quality.attribute_keywords.items()},
                self.quality.priority,
                self.quality.tfidf_threshold,
                rules(self.quality.label_hints),
                self.quality.fallback,
            ),
            SeverityLexicon(
                {k: terms(v) for k, v in self.severity.keywords.items()},
                rules(self.severity.label_map),
                self.severity.comment_medium_threshold,
                self.severity.comment_high_threshold,
                self.severity.security_labels,
                self.severity.security_terms,
                self.severity.closed_states,
            ),
            self.quantum,
        )


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def _check_term(term: str, path: str) -> None:
    if not isinstance(term, str) or not term.strip():
        raise LexiconError(path, "empty term")
    if term != term.lower():
        raise LexiconError(path, f"term {term!r} must be lowercase")


def _check_weight(w: Any, path: str, term: str) -> None:
    if isinstance(w, bool) or not isinstance(w, (int, float)) or not w > 0:
        raise LexiconError(path, f"weight for {term!r} must be a positive number, got {w!r}")


def validate_bug_type(bt: BugTypeLexicon, path: str = "bug_type") -> None:
    seen: dict[str, str] = {}
    for side in ("quantum", "classical"):
        for kind in ("unigrams", "bigrams"):
            name = f"{side}_{kind}"
            for t in getattr(bt, name):
                p = f"{path}.{name}.{t.term}"
                _check_term(t.term, p)
                _check_weight(t.weight, p, t.term)
                n_tokens = len(normalize(t.term).split())
                if kind == "unigrams":
                    if n_tokens != 1:
                        raise LexiconError(p, f"unigram {t.term!r} must be a single token")
                    if t.weight not in (1, 2, 3):
                        raise LexiconError(
                            p, f"unigram {t.term!r} weight must be 1, 2 or 3, got {t.weight!r}"
                        )
                else:
                    if n_tokens < 2:
                        raise LexiconError(p, f"bigram {t.term!r} needs at least two tokens")
                    if t.weight < 2:
                        raise LexiconError(
                            p, f"bigram {t.term!r} weight must be >= 2, got {t.weight!r}"
                        )
                key = normalize(t.term)
                other = seen.get(key)
                if other is not None and other != side:
                    raise LexiconError(
                        p, f"duplicate term {t.term!r} in both quantum and classical lists"
                    )
                seen[key] = side
    for i, phrase in enumerate(bt.negation_phrases):
        _check_term(phrase, f"{path}.negation_phrases[{i}]")


def validate_category(cat: CategoryLexicon, path: str = "category") -> None:
    if not cat.categories:
        raise LexiconError(f"{path}.categories", "no categories defined")
    if len(set(cat.categories)) != len(cat.categories):
        raise LexiconError(f"{path}.categories", "duplicate category name")
    if cat.fallback in cat.categories:
        raise LexiconError(f"{path}.fallback", "fallback must not be a scoring category")
    known = set(cat.vocabulary)
    for r in cat.label_map:
        p = f"{path}.label_map.{r.label}"
        _check_term(r.label, p)
        if r.target not in known:
            raise LexiconError(p, f"unknown category {r.target!r}")
    for name in cat.keywords:
        if name not in cat.categories:
            raise LexiconError(f"{path}.keywords.{name}", f"unknown category {name!r}")
    for name in cat.categories:
        kws = cat.keywords.get(name, ())
        if not kws:
            raise LexiconError(f"{path}.keywords.{name}", "keyword list is empty")
        for t in kws:
            _check_term(t.term, f"{path}.keywords.{name}.{t.term}")


def validate_quality(q: QualityLexicon, path: str = "quality") -> None:
    attrs = list(q.attribute_keywords)
    if sorted(q.priority) != sorted(attrs) or len(set(q.priority)) != len(q.priority):
        raise LexiconError(f"{path}.priority", "priority must list every attribute exactly once")
    if q.fallback in attrs:
        raise LexiconError(f"{path}.fallback", f"{q.fallback!r} must not be a scored attribute")
    if isinstance(q.tfidf_threshold, bool) or not isinstance(q.tfidf_threshold, (int, float)) \
            or q.tfidf_threshold < 0:
        raise LexiconError(f"{path}.tfidf_threshold", "threshold must be a non-negative number")
    for r in q.label_hints:
        p = f"{path}.label_hints.{r.label}"
        _check_term(r.label, p)
        if r.target not in attrs:
            raise LexiconError(p, f"unknown attribute {r.target!r}")
    for name, kws in q.attribute_keywords.items():
        for t in kws:
            p = f"{path}.keywords.{name}.{t.term}"
            _check_term(t.term, p)
            _check_weight(t.weight, p, t.term)


def validate_severity(s: SeverityLexicon, path: str = "severity") -> None:
    for r in s.label_map:
        p = f"{path}.label_map.{r.label}"
        _check_term(r.label, p)
        if r.target not in SEVERITIES:
            raise LexiconError(p, f"unknown severity {r.target!r}")
    for level, kws in s.keywords.items():
        if level not in SEVERITIES:
            raise LexiconError(f"{path}.keywords.{level}", f"unknown severity {level!r}")
        for t in kws:
            p = f"{path}.keywords.{level}.{t.term}"
            _check_term(t.term, p)
            _check_weight(t.weight, p, t.term)
    lo, hi = s.comment_medium_threshold, s.comment_high_threshold
    for name, v in (("comment_medium_threshold", lo), ("comment_high_threshold", hi)):
        if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
            raise LexiconError(f"{path}.{name}", "threshold must be a positive integer")
    if not lo < hi:
        raise LexiconError(f"{path}.comment_high_threshold", "must exceed comment_medium_threshold")


def validate_quantum(qs: QuantumSubtypeLexicon, path: str = "quantum") -> None:
    if not qs.categories:
        raise LexiconError(f"{path}.categories", "no subtypes defined")
    names = [c.name for c in qs.categories]
    if len(set(names)) != len(names):
        raise LexiconError(f"{path}.categories", "duplicate subtype name")
    if qs.fallback in names:
        raise LexiconError(f"{path}.fallback", "fallback must not be a subtype")
    if isinstance(qs.tfidf_scale, bool) or not isinstance(qs.tfidf_scale, (int, float)) \
            or qs.tfidf_scale < 0:
        raise LexiconError(f"{path}.tfidf_scale", "scale must be a non-negative number")
    for c in qs.categories:
        p = f"{path}.categories.{c.name}"
        _check_weight(c.weight, p, c.name)
        if not c.keywords:
            raise LexiconError(p, "keyword list is empty")
        for kw in c.keywords:
            _check_term(kw, f"{p}.{kw}")


def validate(lex: Lexicon) -> Lexicon:
    validate_bug_type(lex.bug_type)
    validate_category(lex.category)
    validate_quality(lex.quality)
    validate_severity(lex.severity)
    validate_quantum(lex.quantum)
    return lex


# --------------------------------------------------------------------------
# YAML <-> Lexicon
# --------------------------------------------------------------------------


def _section(tree: dict, key: str, path: str) -> Any:
    if not isinstance(tree, dict) or key not in tree:
        raise LexiconError(f"{path}.{key}" if path else key, "missing mandatory section")
    return tree[key]


def _groups(node: Any, path: str) -> list[tuple[str, Any]]:
    """Split a ``{paper: ..., curated: ...}`` node into (source, payload) pairs."""
    if node is None:
        return []
    if not isinstance(node, dict) or not set(node) <= set(SOURCES):
        raise LexiconError(path, "expected a mapping with 'paper' and/or 'curated' groups")
    return [(src, node[src]) for src in SOURCES if node.get(src) is not None]


def _weighted(node: Any, path: str) -> tuple[WeightedTerm, ...]:
    out = []
    for src, payload in _groups(node, path):
        if isinstance(payload, list):
            payload = {t: 1 for t in payload}
        if not isinstance(payload, dict):
            raise LexiconError(f"{path}.{src}", "expected a term: weight mapping")
        for term, w in payload.items():
            term = str(term)
            _check_weight(w, f"{path}.{src}.{term}", term)
            out.append(WeightedTerm(term, w, src))
    return tuple(out)


def _plain(node: Any, path: str) -> tuple[WeightedTerm, ...]:
    out = []
    for src, payload in _groups(node, path):
        if not isinstance(payload, list):
            raise LexiconError(f"{path}.{src}", "expected a list of keywords")
        out.extend(WeightedTerm(str(t), 1, src) for t in payload)
    return tuple(out)


def _rules(node: Any, path: str) -> tuple[LabelRule, ...]:
    out = []
    for src, payload in _groups(node, path):
        if not isinstance(payload, dict):
            raise LexiconError(f"{path}.{src}", "expected a label: target mapping")
        out.extend(LabelRule(str(k), str(v), src) for k, v in payload.items())
    return tuple(out)


def _strings(node: Any, path: str) -> tuple[str, ...]:
    if node is None:
        return ()
    if not isinstance(node, list):
        raise LexiconError(path, "expected a list")
    return tuple(str(x) for x in node)


def lexicon_from_dict(tree: dict) -> Lexicon:
    if not isinstance(tree, dict):
        raise LexiconError("<root>", "expected a mapping")

    bt = _section(tree, "bug_type", "")
    bug_type = BugTypeLexicon(
        quantum_unigrams=_weighted(bt.get("quantum_unigrams"), "bug_type.quantum_unigrams"),
        classical_unigrams=_weighted(bt.get("classical_unigrams"), "bug_type.classical_unigrams"),
        quantum_bigrams=_weighted(bt.get("quantum_bigrams"), "bug_type.quantum_bigrams"),
        classical_bigrams=_weighted(bt.get("classical_bigrams"), "bug_type.classical_bigrams"),
        negation_phrases=_strings(bt.get("negation_phrases"), "bug_type.negation_phrases"),
    )

    ct = _section(tree, "category", "")
    kw_node = _section(ct, "keywords", "category")
    if not isinstance(kw_node, dict):
        raise LexiconError("category.keywords", "expected a mapping")
    category = CategoryLexicon(
        categories=_strings(_section(ct, "categories", "category"), "category.categories"),
        keywords={str(k): _plain(v, f"category.keywords.{k}") for k, v in kw_node.items()},
        label_map=_rules(ct.get("label_map"), "category.label_map"),
        fallback=str(ct.get("fallback", "Uncategorized")),
    )

    qt = _section(tree, "quality", "")
    qkw = _section(qt, "keywords", "quality")
    if not isinstance(qkw, dict):
        raise LexiconError("quality.keywords", "expected a mapping")
    quality = QualityLexicon(
        attribute_keywords={str(k): _weighted(v, f"quality.keywords.{k}") for k, v in qkw.items()},
        priority=_strings(_section(qt, "priority", "quality"), "quality.priority"),
        tfidf_threshold=qt.get("tfidf_threshold", 0.1),
        label_hints=_rules(qt.get("label_hints"), "quality.label_hints"),
        fallback=str(qt.get("fallback", "Miscellaneous")),
    )

    st = _section(tree, "severity", "")
    skw = _section(st, "keywords", "severity")
    if not isinstance(skw, dict):
        raise LexiconError("severity.keywords", "expected a mapping")
    severity = SeverityLexicon(
        keywords={str(k): _weighted(v, f"severity.keywords.{k}") for k, v in skw.items()},
        label_map=_rules(st.get("label_map"), "severity.label_map"),
        comment_medium_threshold=st.get("comment_medium_threshold", 10),
        comment_high_threshold=st.get("comment_high_threshold", 20),
        security_labels=_strings(st.get("security_labels", ["security"]), "severity.security_labels"),
        security_terms=_strings(st.get("security_terms", ["vulnerability"]), "severity.security_terms"),
        closed_states=_strings(
            st.get("closed_states", ["closed", "resolved", "fixed"]), "severity.closed_states"
        ),
    )

    qn = _section(tree, "quantum", "")
    rows = _section(qn, "categories", "quantum")
    if not isinstance(rows, list):
        raise LexiconError("quantum.categories", "expected a list of subtypes")
    subtypes = []
    for i, row in enumerate(rows):
        p = f"quantum.categories[{i}]"
        if not isinstance(row, dict) or not {"name", "weight", "keywords"} <= set(row):
            raise LexiconError(p, "subtype needs name, weight and keywords")
        subtypes.append(
            QuantumSubtype(str(row["name"]), row["weight"], _strings(row["keywords"], p + ".keywords"))
        )
    quantum = QuantumSubtypeLexicon(
        categories=tuple(subtypes),
        tfidf_scale=qn.get("tfidf_scale", 2.0),
        fallback=str(qn.get("fallback", "Unclassified")),
    )

    return validate(Lexicon(bug_type, category, quality, severity, quantum))


def _group_weighted(terms: Iterable[WeightedTerm]) -> dict:
    out: dict[str, dict] = {src: {} for src in SOURCES}
    for t in terms:
        out[t.source][t.term] = t.weight
    return out


def _group_plain(terms: Iterable[WeightedTerm]) -> dict:
    out: dict[str, list] = {src: [] for src in SOURCES}
    for t in terms:
        out[t.source].append(t.term)
    return out


def _group_rules(rules: Iterable[LabelRule]) -> dict:
    out: dict[str, dict] = {src: {} for src in SOURCES}
    for r in rules:
        out[r.source][r.label] = r.target
    return out


def lexicon_to_dict(lex: Lexicon) -> dict:
    bt, ct, qt, st, qn = lex.bug_type, lex.category, lex.quality, lex.severity, lex.quantum
    return {
        "bug_type": {
            "negation_phrases": list(bt.negation_phrases),
            "quantum_unigrams": _group_weighted(bt.quantum_unigrams),
            "classical_unigrams": _group_weighted(bt.classical_unigrams),
            "quantum_bigrams": _group_weighted(bt.quantum_bigrams),
            "classical_bigrams": _group_weighted(bt.classical_bigrams),
        },
        "category": {
            "fallback": ct.fallback,
            "categories": list(ct.categories),
            "label_map": _group_rules(ct.label_map),
            "keywords": {k: _group_plain(v) for k, v in ct.keywords.items()},
        },
        "quality": {
            "fallback": qt.fallback,
            "tfidf_threshold": qt.tfidf_threshold,
            "priority": list(qt.priority),
            "label_hints": _group_rules(qt.label_hints),
            "keywords": {k: _group_weighted(v) for k, v in qt.attribute_keywords.items()},
        },
        "severity": {
            "comment_medium_threshold": st.comment_medium_threshold,
            "comment_high_threshold": st.comment_high_threshold,
            "security_labels": list(st.security_labels),
            "security_terms": list(st.security_terms),
            "closed_states": list(st.closed_states),
            "label_map": _group_rules(st.label_map),
            "keywords": {k: _group_weighted(v) for k, v in st.keywords.items()},
        },
        "quantum": {
            "fallback": qn.fallback,
            "tfidf_scale": qn.tfidf_scale,
            "categories": [
                {"name": c.name, "weight": c.weight, "keywords": list(c.keywords)}
                for c in qn.categories
            ],
        },
    }


def load_lexicon(path: str | Path) -> Lexicon:
    text = Path(path).read_text(encoding="utf-8")
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise LexiconError("<root>", f"not a valid configuration document: {exc}") from exc
    return lexicon_from_dict(tree)


def dump_lexicon(lex: Lexicon) -> str:
    return yaml.safe_dump(lexicon_to_dict(lex), sort_keys=False, allow_unicode=True, width=100)


def save_lexicon(lex: Lexicon, path: str | Path) -> None:
    atomic_write_text(path, dump_lexicon(lex))


def default_lexicon() -> Lexicon:
    text = resources.files("qbug.data").joinpath("default_lexicon.yaml").read_text(encoding="utf-8")
    return lexicon_from_dict(yaml.safe_load(text))


# --------------------------------------------------------------------------
# compilation
# --------------------------------------------------------------------------


def _phrase(term: str) -> str:
    return normalize(term)


def _reduced(term: str, stopwords: StopwordList | None) -> str:
    """Normalize, optionally drop stopwords, then stem word by word."""
    ts = tokenize(normalize(term))
    if stopwords is not None:
        ts = remove_stopwords(ts, stopwords)
    return " ".join(porter_stem(t) for t in ts)


@dataclass(frozen=True)
class CompiledBugType:
    quantum_unigrams: dict[str, float]
    classical_unigrams: dict[str, float]
    quantum_bigrams: dict[str, float]
    classical_bigrams: dict[str, float]
    negation_phrases: tuple[str, ...]


@dataclass(frozen=True)
class CompiledCategory:
    categories: tuple[str, ...]
    fallback: str
    label_map: dict[str, str]
    # category -> ((keyword as written, reduced phrase), ...)
    keywords: dict[str, tuple[tuple[str, str], ...]]


@dataclass(frozen=True)
class CompiledQualityTerm:
    term: str
    tokens: tuple[str, ...]
    weight: float


@dataclass(frozen=True)
class CompiledQuality:
    priority: tuple[str, ...]
    fallback: str
    tfidf_threshold: float
    label_hints: dict[str, str]
    keywords: dict[str, tuple[CompiledQualityTerm, ...]]

    def tfidf_terms(self, attribute: str) -> list[str]:
        # TF-IDF runs on unigrams; multi-word keywords only count via weighted_match
        return [k.tokens[0] for k in self.keywords[attribute] if len(k.tokens) == 1]


@dataclass(frozen=True)
class CompiledSeverity:
    label_map: dict[str, str]
    keywords: dict[str, tuple[tuple[str, float], ...]]
    comment_medium_threshold: int
    comment_high_threshold: int
    security_labels: frozenset[str]
    security_terms: tuple[str, ...]
    closed_states: frozenset[str]


@dataclass(frozen=True)
class CompiledSubtype:
    name: str
    weight: float
    keywords: tuple[tuple[str, str], ...]  # (as written, stemmed phrase)
    document: tuple[str, ...]  # stemmed tokens of all keywords, for TF-IDF


@dataclass(frozen=True)
class CompiledQuantum:
    subtypes: tuple[CompiledSubtype, ...]
    tfidf_scale: float
    fallback: str


@dataclass(frozen=True)
class CompiledLexicon:
    bug_type: CompiledBugType
    category: CompiledCategory
    quality: CompiledQuality
    severity: CompiledSeverity
    quantum: CompiledQuantum
    stopwords: StopwordList = field(default_factory=default_stopwords)
    vocabularies: dict[str, tuple[str, ...]] = field(default_factory=dict)


def _weight_map(terms: Iterable[WeightedTerm]) -> dict[str, float]:
    out: dict[str, float] = {}
    for t in terms:
        out[_phrase(t.term)] = t.weight
    return out


def compile_bug_type(bt: BugTypeLexicon) -> CompiledBugType:
    return CompiledBugType(
        quantum_unigrams=_weight_map(bt.quantum_unigrams),
        classical_unigrams=_weight_map(bt.classical_unigrams),
        quantum_bigrams=_weight_map(bt.quantum_bigrams),
        classical_bigrams=_weight_map(bt.classical_bigrams),
        negation_phrases=tuple(dict.fromkeys(_phrase(p) for p in bt.negation_phrases if _phrase(p))),
    )


def compile_category(ct: CategoryLexicon, stopwords: StopwordList) -> CompiledCategory:
    label_map: dict[str, str] = {}
    for r in ct.label_map:
        label_map.setdefault(r.label, r.target)
    keywords = {}
    for name in ct.categories:
        pairs = []
        seen = set()
        for t in ct.keywords.get(name, ()):
            reduced = _reduced(t.term, stopwords)
            if not reduced:
                raise LexiconError(
                    f"category.keywords.{name}.{t.term}", "keyword is empty after stopword removal"
                )
            if reduced not in seen:
                seen.add(reduced)
                pairs.append((t.term, reduced))
        keywords[name] = tuple(pairs)
    return CompiledCategory(ct.categories, ct.fallback, label_map, keywords)


def compile_quality(qt: QualityLexicon) -> CompiledQuality:
    keywords = {}
    for name, terms in qt.attribute_keywords.items():
        merged: dict[tuple[str, ...], CompiledQualityTerm] = {}
        for t in terms:
            toks = tuple(_phrase(t.term).split())
            if toks and toks not in merged:
                merged[toks] = CompiledQualityTerm(t.term, toks, t.weight)
        keywords[name] = tuple(merged.values())
    hints: dict[str, str] = {}
    for r in qt.label_hints:
        hints.setdefault(r.label, r.target)
    return CompiledQuality(qt.priority, qt.fallback, float(qt.tfidf_threshold), hints, keywords)


def compile_severity(st: SeverityLexicon) -> CompiledSeverity:
    label_map: dict[str, str] = {}
    for r in st.label_map:
        label_map.setdefault(r.label, r.target)
    # declaration order of levels in the file decides ties
    keywords = {
        level: tuple(_weight_map(terms).items()) for level, terms in st.keywords.items()
    }
    return CompiledSeverity(
        label_map=label_map,
        keywords=keywords,
        comment_medium_threshold=st.comment_medium_threshold,
        comment_high_threshold=st.comment_high_threshold,
        security_labels=frozenset(l.lower() for l in st.security_labels),
        security_terms=tuple(_phrase(t) for t in st.security_terms if _phrase(t)),
        closed_states=frozenset(s.lower() for s in st.closed_states),
    )


def compile_quantum(qn: QuantumSubtypeLexicon) -> CompiledQuantum:
    subtypes = []
    for c in qn.categories:
        pairs = []
        seen = set()
        for kw in c.keywords:
            stemmed = _reduced(kw, None)
            if stemmed and stemmed not in seen:
                seen.add(stemmed)
                pairs.append((kw, stemmed))
        doc = tuple(tok for _, s in pairs for tok in s.split())
        subtypes.append(CompiledSubtype(c.name, float(c.weight), tuple(pairs), doc))
    return CompiledQuantum(tuple(subtypes), float(qn.tfidf_scale), qn.fallback)


def compile_lexicon(lex: Lexicon, stopwords: StopwordList | None = None) -> CompiledLexicon:
    sw = stopwords if stopwords is not None else default_stopwords()
    return CompiledLexicon(
        bug_type=compile_bug_type(lex.bug_type),
        category=compile_category(lex.category, sw),
        quality=compile_quality(lex.quality),
        severity=compile_severity(lex.severity),
        quantum=compile_quantum(lex.quantum),
        stopwords=sw,
        vocabularies=lex.vocabularies(),
    )

