"""The five rule-based issue classifiers and the per-issue pipeline."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from qbug.corpus import Issue
from qbug.lexicon import CompiledLexicon, CompiledQuality
from qbug.textprep import (
    contains_phrase,
    count_phrase,
    detect_negation,
    normalize,
    porter_stem,
    remove_stopwords,
    tokenize,
)
from qbug.tfidf import IdfModel, cosine, fit_idf, keyword_tfidf_score, transform

DIMENSIONS = ("bug_type", "category", "quality_attribute", "severity", "quantum_subtype")
IDF_SCOPES = ("corpus", "keywords_only")


@dataclass(frozen=True)
class ScoreBreakdown:
    """Audit trail for one decision.

    ``per_label_scores`` holds keyword evidence; ``similarity`` holds any
    TF-IDF contribution already included in the scores (subtypes) or tested
    against a threshold (quality attributes).
    """

    per_label_scores: dict[str, float]
    matched_terms: dict[str, tuple[tuple[str, float], ...]]
    decision_rule: str
    similarity: dict[str, float] = field(default_factory=dict)


class Verdict(NamedTuple):
    label: str
    breakdown: ScoreBreakdown


@dataclass(frozen=True)
class Classification:
    issue_key: tuple[str, int]
    bug_type: Verdict | None = None
    category: Verdict | None = None
    quality_attribute: Verdict | None = None
    severity: Verdict | None = None
    quantum_subtype: Verdict | None = None

    def labels(self) -> dict[str, str | None]:
        return {d: (v.label if (v := getattr(self, d)) is not None else None) for d in DIMENSIONS}


def issue_text(issue: Issue) -> str:
    return normalize(issue.title, issue.body, issue.comments_text)


def _argmax(scores: dict[str, float], order: Sequence[str]) -> tuple[str, float]:
    """Highest score, ties going to the label declared first."""
    best, best_score = None, None
    for label in order:
        s = scores.get(label, 0.0)
        if best is None or s > best_score:
            best, best_score = label, s
    return best, best_score


# --------------------------------------------------------------------------
# bug type
# --------------------------------------------------------------------------


def _bug_type_side(text: str, tokens: set[str], unigrams: dict, phrases: dict):
    matched = [(t, w) for t, w in unigrams.items() if t in tokens]
    matched += [(p, w) for p, w in phrases.items() if contains_phrase(text, p)]
    return sum(w for _, w in matched), tuple(matched)


def classify_bug_type(issue: Issue, lex: CompiledLexicon, text: str | None = None) -> Verdict:
    """Quantum / Classical / Uncategorized by weighted term evidence.

    Each distinct unigram or phrase counts once. A negation phrase forces
    Uncategorized; so does any tie, including 0 = 0.
    """
    bt = lex.bug_type
    text = issue_text(issue) if text is None else text
    tokens = set(text.split())
    q, q_terms = _bug_type_side(text, tokens, bt.quantum_unigrams, bt.quantum_bigrams)
    c, c_terms = _bug_type_side(text, tokens, bt.classical_unigrams, bt.classical_bigrams)

    if detect_negation(text, bt.negation_phrases):
        label, rule = "Uncategorized", "negation-override"
    elif q > c:
        label, rule = "Quantum", "argmax"
    elif c > q:
        label, rule = "Classical", "argmax"
    else:
        label, rule = "Uncategorized", "fallback"
    return Verdict(label, ScoreBreakdown({"Quantum": q, "Classical": c},
                                         {"Quantum": q_terms, "Classical": c_terms}, rule))


# --------------------------------------------------------------------------
# bug category
# --------------------------------------------------------------------------


def reduced_text(text: str, lex: CompiledLexicon) -> str:
    """Stopword-filtered, stemmed form used for category keywords."""
    ts = remove_stopwords(tokenize(text), lex.stopwords)
    return " ".join(porter_stem(t) for t in ts)


def classify_category(issue: Issue, lex: CompiledLexicon, text: str | None = None) -> Verdict:
    cat = lex.category
    for label in issue.labels:
        target = cat.label_map.get(label)
        if target is not None:
            return Verdict(target, ScoreBreakdown({}, {target: ((label, 1),)}, "label-map"))

    reduced = reduced_text(issue_text(issue) if text is None else text, lex)
    scores: dict[str, float] = {}
    matched: dict[str, tuple[tuple[str, float], ...]] = {}
    for name in cat.categories:
        hits = tuple((kw, 1) for kw, phrase in cat.keywords[name] if contains_phrase(reduced, phrase))
        scores[name] = len(hits)
        if hits:
            matched[name] = hits

    best, best_score = _argmax(scores, cat.categories)
    if best_score >= 1:
        tied = sum(1 for s in scores.values() if s == best_score) > 1
        rule = "argmax-tiebreak" if tied else "argmax"
        return Verdict(best, ScoreBreakdown(scores, matched, rule))
    return Verdict(cat.fallback, ScoreBreakdown(scores, matched, "fallback"))


# --------------------------------------------------------------------------
# quality attribute
# --------------------------------------------------------------------------


def quality_tokens(text: str, lex: CompiledLexicon) -> tuple[str, ...]:
    return remove_stopwords(tokenize(text), lex.stopwords).tokens


def build_idf_model(
    issues: Iterable[Issue], lex: CompiledLexicon, scope: str = "corpus"
) -> IdfModel:
    """IDF statistics for the quality-attribute TF-IDF test.

    ``corpus`` fits over the issues being classified; ``keywords_only`` fits
    over one pseudo-document per attribute made of its unigram keywords.
    """
    if scope == "corpus":
        docs = [quality_tokens(issue_text(i), lex) for i in issues]
        if docs:
            return fit_idf(docs)
        scope = "keywords_only"
    if scope == "keywords_only":
        return fit_idf([lex.quality.tfidf_terms(a) for a in lex.quality.priority])
    raise ValueError(f"unknown idf scope {scope!r}; expected one of {IDF_SCOPES}")


def weighted_match(tokens: Sequence[str], q: CompiledQuality, attribute: str):
    """Occurrence count x weight, summed over the attribute's keywords."""
    hits = []
    for kw in q.keywords[attribute]:
        n = count_phrase(tokens, kw.tokens)
        if n:
            hits.append((kw.term, n * kw.weight))
    return sum(w for _, w in hits), tuple(hits)


def classify_quality(
    issue: Issue,
    lex: CompiledLexicon,
    idf_model: IdfModel | None = None,
    text: str | None = None,
) -> Verdict:
    """A label hint wins outright (first in priority order); otherwise the
    first attribute whose TF-IDF score or weighted keyword sum fires;
    otherwise the fallback label.

    Without an ``idf_model`` the TF-IDF test is skipped.
    """
    q = lex.quality
    text = issue_text(issue) if text is None else text
    tokens = text.split()
    filtered = quality_tokens(text, lex)
    labels = set(issue.labels)

    scores, sims, matched = {}, {}, {}
    chosen = None
    # label evidence is checked for every attribute before any text evidence
    for attr in q.priority:
        keyword_terms = {" ".join(k.tokens) for k in q.keywords[attr]}
        if any(q.label_hints.get(l) == attr or l in keyword_terms for l in labels):
            chosen = (attr, "label-hint")
            break
    for attr in q.priority:
        weighted, hits = weighted_match(tokens, q, attr)
        scores[attr] = weighted
        if hits:
            matched[attr] = hits
        tfidf = 0.0
        if idf_model is not None:
            tfidf = keyword_tfidf_score(filtered, q.tfidf_terms(attr), idf_model)
        sims[attr] = tfidf
        if chosen is None:
            if tfidf > q.tfidf_threshold:
                chosen = (attr, "tfidf")
            elif weighted > 0:
                chosen = (attr, "weighted-match")

    if chosen is None:
        return Verdict(q.fallback, ScoreBreakdown(scores, matched, "fallback", sims))
    return Verdict(chosen[0], ScoreBreakdown(scores, matched, chosen[1], sims))


# --------------------------------------------------------------------------
# severity
# --------------------------------------------------------------------------


def classify_severity(issue: Issue, lex: CompiledLexicon, text: str | None = None) -> Verdict:
    """Layered severity rules; ``decision_rule`` lists every rule that fired, joined by '+'."""
    sv = lex.severity
    text = issue_text(issue) if text is None else text
    fired = ["default"]
    severity = "Low"

    for label in issue.labels:
        if label in sv.label_map:
            severity = sv.label_map[label]
            fired.append("label-map")
            break

    scores: dict[str, float] = {}
    matched: dict[str, tuple[tuple[str, float], ...]] = {}
    if severity == "Low":
        for level, terms in sv.keywords.items():
            hits = tuple((t, w) for t, w in terms if contains_phrase(text, t))
            if hits:
                scores[level] = sum(w for _, w in hits)
                matched[level] = hits
        if scores:
            severity, _ = _argmax(scores, list(scores))
            fired.append("keyword-argmax")

    n = issue.comment_count
    if n > sv.comment_high_threshold and severity in ("Low", "Medium"):
        severity = "High"
        fired.append("comment-high")
    elif n > sv.comment_medium_threshold and severity == "Low":
        severity = "Medium"
        fired.append("comment-medium")

    if sv.security_labels & set(issue.labels) or any(
        contains_phrase(text, t) for t in sv.security_terms
    ):
        severity = "Critical"
        fired.append("security-override")

    if issue.state in sv.closed_states and severity != "Critical":
        severity = "Low"
        fired.append("closed-downgrade")

    return Verdict(severity, ScoreBreakdown(scores, matched, "+".join(fired)))


# --------------------------------------------------------------------------
# quantum subtype
# --------------------------------------------------------------------------


def stemmed_tokens(text: str) -> list[str]:
    return [porter_stem(t) for t in text.split()]


def classify_quantum_subtype(issue: Issue, lex: CompiledLexicon, text: str | None = None) -> Verdict:
    """Keyword hits x subtype weight plus scaled TF-IDF cosine to each
    subtype's keyword document; all-zero scores give the fallback label."""
    qn = lex.quantum
    toks = stemmed_tokens(issue_text(issue) if text is None else text)
    stemmed = " ".join(toks)

    model = fit_idf([s.document for s in qn.subtypes] + [toks])
    issue_vec = transform(toks, model)

    scores, sims, matched = {}, {}, {}
    for sub in qn.subtypes:
        hits = tuple((kw, sub.weight) for kw, phrase in sub.keywords if contains_phrase(stemmed, phrase))
        sim = cosine(issue_vec, transform(sub.document, model))
        sims[sub.name] = sim
        scores[sub.name] = len(hits) * sub.weight + qn.tfidf_scale * sim
        if hits:
            matched[sub.name] = hits

    order = [s.name for s in qn.subtypes]
    if all(s == 0 for s in scores.values()):
        return Verdict(qn.fallback, ScoreBreakdown(scores, matched, "fallback", sims))
    best, _ = _argmax(scores, order)
    return Verdict(best, ScoreBreakdown(scores, matched, "argmax", sims))


# --------------------------------------------------------------------------
# pipeline
# --------------------------------------------------------------------------


def classify_issue(
    issue: Issue,
    lex: CompiledLexicon,
    idf_model: IdfModel | None = None,
    only: Iterable[str] | None = None,
) -> Classification:
    """Run the requested classifiers (all by default).

    The quantum subtype is only computed for issues classified Quantum, so
    asking for it implies the bug type.
    """
    dims = set(DIMENSIONS if only is None else only)
    unknown = dims - set(DIMENSIONS)
    if unknown:
        raise ValueError(f"unknown dimension(s): {', '.join(sorted(unknown))}")
    if "quantum_subtype" in dims:
        dims.add("bug_type")

    text = issue_text(issue)
    out: dict[str, Verdict | None] = {}
    if "bug_type" in dims:
        out["bug_type"] = classify_bug_type(issue, lex, text)
    if "category" in dims:
        out["category"] = classify_category(issue, lex, text)
    if "quality_attribute" in dims:
        out["quality_attribute"] = classify_quality(issue, lex, idf_model, text)
    if "severity" in dims:
        out["severity"] = classify_severity(issue, lex, text)
    if "quantum_subtype" in dims and out["bug_type"].label == "Quantum":
        out["quantum_subtype"] = classify_quantum_subtype(issue, lex, text)
    return Classification(issue.key, **out)


def classify_corpus(
    issues: Iterable[Issue],
    lex: CompiledLexicon,
    idf_model: IdfModel | None = None,
    only: Iterable[str] | None = None,
    parallelism: int = 1,
) -> list[Classification]:
    """Classify many issues; results are ordered by (repo, number)."""
    ordered = sorted(issues, key=lambda i: i.key)
    only = None if only is None else tuple(only)

    def one(issue: Issue) -> Classification:
        return classify_issue(issue, lex, idf_model, only)

    if parallelism <= 1:
        return [one(i) for i in ordered]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, ordered))
