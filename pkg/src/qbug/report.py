"""Distribution tables, evaluation tables and per-issue result files."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from qbug.classify import DIMENSIONS, Classification, Verdict
from qbug.corpus import atomic_write_text
from qbug.evaluation import EvalReport

RESULT_FORMATS = ("csv", "ndjson")
RESULT_COLUMNS = ("repo", "number") + tuple(
    col for d in DIMENSIONS for col in (d, f"{d}_score", f"{d}_rule")
)


@dataclass(frozen=True)
class DistributionRow:
    label: str
    count: int
    percentage: float


@dataclass(frozen=True)
class DistributionTable:
    dimension: str
    rows: tuple[DistributionRow, ...]
    total: int


def percentage(count: int, total: int) -> float:
    """100 x count / total, rounded half-up to one decimal."""
    if total <= 0:
        raise ValueError("total must be positive")
    return math.floor(Fraction(1000 * count, total) + Fraction(1, 2)) / 10


def distribution(classifications: Sequence[Classification], dimension: str) -> DistributionTable:
    if dimension not in DIMENSIONS:
        raise ValueError(f"unknown dimension {dimension!r}")
    if not classifications:
        raise ValueError("no classifications to tabulate")
    counts = Counter(
        v.label for c in classifications if (v := getattr(c, dimension)) is not None
    )
    total = sum(counts.values())
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    rows = tuple(DistributionRow(l, n, percentage(n, total)) for l, n in ranked)
    return DistributionTable(dimension, rows, total)


# --------------------------------------------------------------------------
# table rendering
# --------------------------------------------------------------------------


def _render(headers: Sequence[str], rows: Sequence[Sequence[str]], style: str) -> str:
    if style == "pipe":
        lines = ["| " + " | ".join(headers) + " |", "|" + "|".join("---" for _ in headers) + "|"]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    if style != "text":
        raise ValueError(f"unknown table style {style!r}")
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]

    def line(cells):
        # first column left-aligned, numbers right-aligned
        out = [cells[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join(out).rstrip()

    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(headers), sep, *(line(r) for r in rows)]) + "\n"


def render_distribution(table: DistributionTable, style: str = "text") -> str:
    rows = [(r.label, f"{r.count:,}", f"{r.percentage:.1f}%") for r in table.rows]
    rows.append(("Total", f"{table.total:,}", "100.0%" if table.total else "0.0%"))
    title = f"Distribution of {table.dimension}\n"
    return title + _render((table.dimension, "Count", "Percentage"), rows, style)


def render_text(table: DistributionTable) -> str:
    return render_distribution(table, "text")


def render_pipe(table: DistributionTable) -> str:
    return render_distribution(table, "pipe")


def _fmt(x: float | None, digits: int = 4) -> str:
    if x is None:
        return "n/a"
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return f"{x:.{digits}f}"


def render_eval_report(report: EvalReport, style: str = "text") -> str:
    """Metric table plus agreement table, one row per evaluated dimension."""
    dims = list(report.dimensions.values())
    metrics = [
        (d.dimension, str(d.n), _fmt(d.accuracy), _fmt(d.precision), _fmt(d.recall), _fmt(d.f1))
        for d in dims
    ]
    agreement = [
        (
            d.dimension,
            _fmt(d.t_statistic),
            _fmt(d.p_value),
            _fmt(d.kappa, 3),
            d.kappa_band,
            ", ".join(d.notes),
        )
        for d in dims
    ]
    out = _render(
        ("Attribute", "N", "Accuracy", "Precision (W)", "Recall (W)", "F1 (W)"), metrics, style
    )
    out += "\n"
    out += _render(("Attribute", "t", "p", "Kappa", "Agreement", "Notes"), agreement, style)
    if any("nominal-coding" in d.notes for d in dims):
        out += "\nnominal-coding: t-test run on declaration-order codes of unordered labels; treat as indicative only.\n"
    return out


# --------------------------------------------------------------------------
# per-issue results
# --------------------------------------------------------------------------


def winning_score(verdict: Verdict) -> float:
    """Score behind the chosen label: the TF-IDF value when that test decided,
    otherwise the label's keyword score (0 for fallbacks)."""
    b = verdict.breakdown
    if b.decision_rule == "tfidf":
        return b.similarity.get(verdict.label, 0.0)
    return b.per_label_scores.get(verdict.label, 0.0)


def result_record(c: Classification) -> dict:
    rec: dict = {"repo": c.issue_key[0], "number": c.issue_key[1]}
    for d in DIMENSIONS:
        v = getattr(c, d)
        rec[d] = v.label if v else None
        rec[f"{d}_score"] = round(winning_score(v), 6) if v else None
        rec[f"{d}_rule"] = v.breakdown.decision_rule if v else None
    return rec


def dumps_results(classifications: Iterable[Classification], fmt: str) -> str:
    records = [result_record(c) for c in classifications]
    if fmt == "ndjson":
        return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
    if fmt != "csv":
        raise ValueError(f"unknown result format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(RESULT_COLUMNS)
    for r in records:
        w.writerow(
            [
                "" if r[col] is None else (f"{r[col]:.6f}" if col.endswith("_score") else r[col])
                for col in RESULT_COLUMNS
            ]
        )
    return buf.getvalue()


def write_results(classifications: Iterable[Classification], path: str | Path, fmt: str = "csv") -> None:
    text = dumps_results(classifications, fmt)
    try:
        atomic_write_text(path, text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from exc


def read_results(path: str | Path, fmt: str | None = None) -> list[dict]:
    """Parse a results file back into records (labels as strings or None)."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "ndjson"
    text = path.read_text(encoding="utf-8")
    if fmt == "ndjson":
        return [json.loads(line) for line in text.splitlines() if line.strip()]
    if fmt != "csv":
        raise ValueError(f"unknown result format {fmt!r}")
    out = []
    for row in csv.DictReader(io.StringIO(text, newline="")):
        rec: dict = {}
        for col in RESULT_COLUMNS:
            val = row.get(col, "")
            if col == "number":
                rec[col] = int(val)
            elif val == "":
                rec[col] = None
            elif col.endswith("_score"):
                rec[col] = float(val)
            else:
                rec[col] = val
        out.append(rec)
    return out


def predictions_from_records(records: Iterable[dict]) -> dict[tuple[str, int], dict[str, str | None]]:
    return {(r["repo"], int(r["number"])): {d: r.get(d) for d in DIMENSIONS} for r in records}
