"""Agreement between automated labels and manual annotations.

Confusion matrices, support-weighted precision/recall/F1, Cohen's kappa with
Landis-Koch bands, a paired t-test on integer label codes, and proportional
stratified sampling for building annotation sets.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

from qbug.classify import DIMENSIONS
from qbug.corpus import Corpus, Issue
from qbug.lexicon import SEVERITIES

IssueKey = tuple[str, int]
Predictions = Mapping[IssueKey, Mapping[str, "str | None"]]


class EvaluationError(ValueError):
    pass


class AnnotationFormatError(ValueError):
    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


# --------------------------------------------------------------------------
# confusion matrix and metrics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]  # rows = truth, columns = predicted

    @property
    def total(self) -> int:
        return sum(sum(r) for r in self.counts)

    def row_sums(self) -> list[int]:
        return [sum(r) for r in self.counts]

    def col_sums(self) -> list[int]:
        k = len(self.labels)
        return [sum(self.counts[i][j] for i in range(k)) for j in range(k)]

    def trace(self) -> int:
        return sum(self.counts[i][i] for i in range(len(self.labels)))


def confusion(
    truth: Sequence[str], pred: Sequence[str], labels: Sequence[str] | None = None
) -> ConfusionMatrix:
    """Tally (truth, predicted) pairs.

    ``labels`` fixes the row/column order; labels seen in the data but not
    listed are appended in sorted order.
    """
    if len(truth) != len(pred):
        raise ValueError(f"length mismatch: {len(truth)} truth vs {len(pred)} predicted")
    if not truth:
        raise ValueError("need at least one pair")
    order = list(dict.fromkeys(labels or ()))
    seen = set(order)
    order += sorted({*truth, *pred} - seen)
    index = {l: i for i, l in enumerate(order)}
    k = len(order)
    grid = [[0] * k for _ in range(k)]
    for t, p in zip(truth, pred):
        grid[index[t]][index[p]] += 1
    return ConfusionMatrix(tuple(order), tuple(tuple(r) for r in grid))


class Metrics(NamedTuple):
    accuracy: float
    precision: float
    recall: float
    f1: float


def weighted_metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy and true-support-weighted precision, recall and F1."""
    total = cm.total
    if total <= 0:
        raise ValueError("empty confusion matrix")
    rows, cols = cm.row_sums(), cm.col_sums()
    p_acc, r_acc, f_acc = [], [], []
    for i in range(len(cm.labels)):
        tp = cm.counts[i][i]
        p = tp / cols[i] if cols[i] else 0.0
        r = tp / rows[i] if rows[i] else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        p_acc.append(rows[i] * p)
        # support x (tp / support) is tp; using it directly keeps recall == accuracy bit-for-bit
        r_acc.append(float(tp))
        f_acc.append(rows[i] * f)
    return Metrics(
        cm.trace() / total,
        math.fsum(p_acc) / total,
        math.fsum(r_acc) / total,
        math.fsum(f_acc) / total,
    )


def cohens_kappa(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total <= 0:
        raise ValueError("empty confusion matrix")
    p_o = cm.trace() / total
    p_e = math.fsum(r * c for r, c in zip(cm.row_sums(), cm.col_sums())) / (total * total)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def kappa_band(kappa: float) -> str:
    """Landis-Koch interpretation of a kappa value."""
    if kappa < 0:
        return "poor"
    if kappa <= 0.20:
        return "slight"
    if kappa <= 0.40:
        return "fair"
    if kappa <= 0.60:
        return "moderate"
    if kappa <= 0.80:
        return "substantial"
    return "almost perfect"


# --------------------------------------------------------------------------
# Student t
# --------------------------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, 10000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return min(1.0, betainc(df / 2.0, 0.5, x))


def t_cdf(t: float, df: float) -> float:
    tail = 0.5 * t_two_sided_p(t, df)
    return 1.0 - tail if t > 0 else tail


class TTest(NamedTuple):
    t: float
    p: float
    df: int
    degenerate: bool = False  # zero-variance differences


def paired_t_test(truth_codes: Sequence[float], pred_codes: Sequence[float]) -> TTest:
    """Paired t-test on differences ``pred - truth``."""
    if len(truth_codes) != len(pred_codes):
        raise ValueError("paired samples must have equal length")
    n = len(truth_codes)
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    d = [p - t for t, p in zip(truth_codes, pred_codes)]
    mean = math.fsum(d) / n
    var = math.fsum((x - mean) ** 2 for x in d) / (n - 1)
    df = n - 1
    if var == 0.0:
        if mean == 0.0:
            return TTest(0.0, 1.0, df, True)
        return TTest(math.copysign(math.inf, mean), 0.0, df, True)
    t = mean / math.sqrt(var / n)
    return TTest(t, t_two_sided_p(t, df), df)


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def _stratum_value(issue: Issue, labels: Mapping[str, "str | None"], dim: str) -> str | None:
    if dim == "repo":
        return issue.repo
    if dim not in DIMENSIONS:
        raise ValueError(f"unknown stratum {dim!r}")
    return labels.get(dim)


def stratified_sample(
    corpus: Corpus | Sequence[Issue],
    predictions: Predictions,
    fraction: float,
    strata: Sequence[str],
    seed: int,
) -> list[Issue]:
    """Proportional stratified sample, ordered by (repo, number).

    Strata are predicted labels (or ``repo``). Issues with no value for some
    stratum dimension, such as a missing quantum subtype, are not eligible.
    Per-stratum sizes use largest-remainder rounding so they add up to
    round(fraction x eligible).
    """
    issues = sorted(corpus, key=lambda i: i.key)
    if not issues:
        raise ValueError("cannot sample an empty corpus")
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    frac = Fraction(repr(float(fraction)))

    groups: dict[tuple[str, ...], list[Issue]] = {}
    for issue in issues:
        labels = predictions.get(issue.key)
        if labels is None:
            raise ValueError(f"no prediction for {issue.repo}#{issue.number}")
        values = tuple(_stratum_value(issue, labels, s) for s in strata)
        if any(v is None for v in values):
            continue
        groups.setdefault(values, []).append(issue)

    keys = sorted(groups)
    eligible = sum(len(groups[k]) for k in keys)
    target = math.floor(frac * eligible + Fraction(1, 2))
    exact = {k: frac * len(groups[k]) for k in keys}
    quota = {k: math.floor(v) for k, v in exact.items()}
    short = target - sum(quota.values())
    by_remainder = sorted(keys, key=lambda k: (-(exact[k] - quota[k]), k))
    for k in by_remainder[:short]:
        quota[k] += 1

    rng = random.Random(seed)
    picked: list[Issue] = []
    for k in keys:
        picked.extend(rng.sample(groups[k], quota[k]))
    return sorted(picked, key=lambda i: i.key)


# --------------------------------------------------------------------------
# annotations and the evaluation report
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnotatedIssue:
    issue_key: IssueKey
    truth: dict[str, str]

    def __post_init__(self):
        if not self.truth:
            raise ValueError("annotation has no labelled dimension")
        unknown = set(self.truth) - set(DIMENSIONS)
        if unknown:
            raise ValueError(f"unknown dimension(s): {', '.join(sorted(unknown))}")


def load_annotations(
    path: str | Path, vocabularies: Mapping[str, Sequence[str]] | None = None
) -> list[AnnotatedIssue]:
    """Read NDJSON annotations; unknown labels are rejected with their line."""
    path = str(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise ValueError("record is not an object")
                extra = set(rec) - {"repo", "number", *DIMENSIONS}
                if extra:
                    raise ValueError(f"unknown field(s): {', '.join(sorted(extra))}")
                truth = {d: rec[d] for d in DIMENSIONS if rec.get(d) is not None}
                if vocabularies is not None:
                    for d, label in truth.items():
                        if label not in vocabularies[d]:
                            raise ValueError(f"unknown {d} label {label!r}")
                out.append(AnnotatedIssue((str(rec["repo"]), int(rec["number"])), truth))
            except (KeyError, ValueError, TypeError) as exc:
                raise AnnotationFormatError(path, lineno, str(exc)) from exc
    return out


def default_label_codes(vocabularies: Mapping[str, Sequence[str]]) -> dict[str, dict[str, int]]:
    """Integer codes for the t-test: severity is ordinal, the rest follow
    declaration order."""
    codes = {d: {l: i for i, l in enumerate(v)} for d, v in vocabularies.items()}
    codes["severity"] = {l: i for i, l in enumerate(SEVERITIES)}
    return codes


@dataclass(frozen=True)
class DimensionReport:
    dimension: str
    n: int
    confusion: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float
    kappa: float
    kappa_band: str
    t_statistic: float | None
    p_value: float | None
    df: int | None
    notes: tuple[str, ...] = ()
    skipped: int = 0

    def to_dict(self) -> dict:
        def num(x):
            if x is None:
                return None
            if isinstance(x, float) and math.isinf(x):
                return "inf" if x > 0 else "-inf"
            return x

        return {
            "dimension": self.dimension,
            "n": self.n,
            "skipped": self.skipped,
            "accuracy": self.accuracy,
            "precision_weighted": self.precision,
            "recall_weighted": self.recall,
            "f1_weighted": self.f1,
            "kappa": self.kappa,
            "kappa_band": self.kappa_band,
            "t_statistic": num(self.t_statistic),
            "p_value": num(self.p_value),
            "df": self.df,
            "notes": list(self.notes),
            "confusion": {
                "labels": list(self.confusion.labels),
                "counts": [list(r) for r in self.confusion.counts],
            },
        }


@dataclass(frozen=True)
class EvalReport:
    dimensions: dict[str, DimensionReport] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"dimensions": [r.to_dict() for r in self.dimensions.values()]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def evaluate(
    annotations: Iterable[AnnotatedIssue],
    predictions: Predictions,
    label_codes: Mapping[str, Mapping[str, int]],
    vocabularies: Mapping[str, Sequence[str]] | None = None,
) -> EvalReport:
    """Compare annotations with predictions, one report per annotated dimension.

    Issues annotated in a dimension the pipeline did not predict for them
    (a quantum subtype on a non-quantum issue) are counted as ``skipped``.
    """
    annotations = list(annotations)
    for a in annotations:
        if a.issue_key not in predictions:
            repo, number = a.issue_key
            raise EvaluationError(f"annotation references unknown issue {repo}#{number}")

    reports: dict[str, DimensionReport] = {}
    for dim in DIMENSIONS:
        truth, pred, skipped = [], [], 0
        for a in annotations:
            if dim not in a.truth:
                continue
            p = predictions[a.issue_key].get(dim)
            if p is None:
                skipped += 1
                continue
            truth.append(a.truth[dim])
            pred.append(p)
        if not truth:
            continue

        order = None
        if vocabularies is not None:
            present = set(truth) | set(pred)
            order = [l for l in vocabularies[dim] if l in present]
        cm = confusion(truth, pred, order)
        m = weighted_metrics(cm)
        kappa = cohens_kappa(cm)

        notes = []
        if dim != "severity":
            notes.append("nominal-coding")
        codes = label_codes[dim]
        missing = sorted({*truth, *pred} - set(codes))
        if missing:
            raise EvaluationError(f"no {dim} code for label(s): {', '.join(missing)}")
        if len(truth) >= 2:
            tt = paired_t_test([codes[l] for l in truth], [codes[l] for l in pred])
            t, p, df = tt.t, tt.p, tt.df
            if tt.degenerate:
                notes.append("zero-variance")
        else:
            t = p = df = None
            notes.append("too-few-pairs")

        reports[dim] = DimensionReport(
            dimension=dim,
            n=len(truth),
            confusion=cm,
            accuracy=m.accuracy,
            precision=m.precision,
            recall=m.recall,
            f1=m.f1,
            kappa=kappa,
            kappa_band=kappa_band(kappa),
            t_statistic=t,
            p_value=p,
            df=df,
            notes=tuple(notes),
            skipped=skipped,
        )
    return EvalReport(reports)
