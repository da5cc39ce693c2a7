"""``qbug`` command-line entry point.

Exit codes:
    0   success
    2   partial fetch (at least one repository failed)
    64  usage error
    65  malformed input data (corpus, lexicon, annotations, predictions)
    66  input file not found
    73  output cannot be written
    77  forge credentials rejected
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from pathlib import Path
from typing import Sequence

from qbug.classify import DIMENSIONS, IDF_SCOPES, build_idf_model, classify_corpus
from qbug.corpus import (
    DEFAULT_API_BASE,
    TOKEN_ENV,
    Corpus,
    CorpusFormatError,
    CredentialError,
    ForgeError,
    atomic_write_text,
    dumps_corpus,
    filter_issues,
    fetch_repo_issues,
    load_corpus,
    strip_markup,
)
from qbug.evaluation import (
    AnnotationFormatError,
    EvaluationError,
    default_label_codes,
    evaluate,
    load_annotations,
    stratified_sample,
)
from qbug.lexicon import (
    LexiconError,
    compile_lexicon,
    default_lexicon,
    dump_lexicon,
    load_lexicon,
)
from qbug.report import (
    RESULT_FORMATS,
    distribution,
    dumps_results,
    predictions_from_records,
    read_results,
    render_distribution,
    render_eval_report,
)

EX_OK = 0
EX_PARTIAL = 2
EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66
EX_CANTCREAT = 73
EX_NOPERM = 77

DEFAULT_SEED = 20240601


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _fraction(value: str) -> float:
    try:
        f = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None
    if not 0 < f <= 1:
        raise argparse.ArgumentTypeError("must satisfy 0 < fraction <= 1")
    return f


def _dimension_list(value: str) -> list[str]:
    dims = [d.strip() for d in value.split(",") if d.strip()]
    bad = [d for d in dims if d not in DIMENSIONS]
    if bad or not dims:
        raise argparse.ArgumentTypeError(
            f"unknown dimension(s) {', '.join(bad) or '(none)'}; choose from {', '.join(DIMENSIONS)}"
        )
    return dims


def _strata_list(value: str) -> list[str]:
    dims = [d.strip() for d in value.split(",") if d.strip()]
    bad = [d for d in dims if d not in DIMENSIONS and d != "repo"]
    if bad or not dims:
        raise argparse.ArgumentTypeError(
            f"unknown stratum {', '.join(bad) or '(none)'}; choose from repo, {', '.join(DIMENSIONS)}"
        )
    return dims


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qbug", description="Rule-based classification of quantum-software issues.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    f = sub.add_parser("fetch", help="download issues from a forge into a corpus file")
    f.add_argument("repos", nargs="*", metavar="OWNER/NAME")
    f.add_argument("--out", required=True)
    f.add_argument("--api-base", default=DEFAULT_API_BASE)
    f.add_argument("--parallelism", type=_positive_int, default=4)
    f.add_argument("--no-comments", action="store_true", help="skip comment retrieval")
    f.add_argument("--keep-markup", action="store_true")

    c = sub.add_parser("classify", help="label every issue of a corpus")
    c.add_argument("--corpus", required=True)
    c.add_argument("--lexicon", help="lexicon file (bundled default if omitted)")
    c.add_argument("--out", required=True)
    c.add_argument("--format", choices=RESULT_FORMATS, help="defaults to the --out suffix, else csv")
    c.add_argument("--only", type=_dimension_list, help="comma-separated dimensions")
    c.add_argument("--parallelism", type=_positive_int, default=1)
    c.add_argument("--idf-scope", choices=IDF_SCOPES, default="corpus")
    c.add_argument("--table-style", choices=("text", "pipe"), default="text")

    s = sub.add_parser("sample", help="stratified random sample for manual annotation")
    s.add_argument("--corpus", required=True)
    s.add_argument("--predictions", required=True, help="results file written by classify")
    s.add_argument("--fraction", type=_fraction, required=True)
    s.add_argument("--strata", type=_strata_list, default=["repo", "bug_type", "category"])
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--out", required=True)

    e = sub.add_parser("evaluate", help="compare predictions with manual annotations")
    e.add_argument("--annotations", required=True)
    e.add_argument("--predictions", required=True)
    e.add_argument("--lexicon")
    e.add_argument("--out", help="JSON report path")
    e.add_argument("--table-style", choices=("text", "pipe"), default="text")

    lx = sub.add_parser("lexicon", help="inspect lexicon files")
    lsub = lx.add_subparsers(dest="lexicon_command", parser_class=_Parser, required=True)
    v = lsub.add_parser("validate")
    v.add_argument("path")
    d = lsub.add_parser("dump", help="write the bundled default lexicon")
    d.add_argument("--out")
    return p


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _need_file(path: str, what: str) -> None:
    if not Path(path).is_file():
        raise CliError(EX_NOINPUT, f"{what} not found: {path}")


def _write(path: str, text: str) -> None:
    try:
        atomic_write_text(path, text)
    except OSError as exc:
        raise CliError(EX_CANTCREAT, f"cannot write {path}: {exc.strerror or exc}") from exc


def _lexicon(path: str | None):
    if path is None:
        return default_lexicon()
    _need_file(path, "lexicon file")
    try:
        return load_lexicon(path)
    except LexiconError as exc:
        raise CliError(EX_DATAERR, f"{path}: {exc}") from exc


def _corpus(path: str) -> Corpus:
    _need_file(path, "corpus file")
    try:
        return load_corpus(path)
    except CorpusFormatError as exc:
        raise CliError(EX_DATAERR, str(exc)) from exc


def _predictions(path: str):
    _need_file(path, "predictions file")
    try:
        return predictions_from_records(read_results(path))
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(EX_DATAERR, f"{path}: malformed results file: {exc}") from exc


def _clean(issue):
    return dataclasses.replace(
        issue,
        title=strip_markup(issue.title),
        body=strip_markup(issue.body),
        comments_text=tuple(strip_markup(c) for c in issue.comments_text),
    )


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_fetch(args, out, err) -> int:
    if not args.repos:
        raise CliError(EX_USAGE, "fetch needs at least one OWNER/NAME repository")
    token = os.environ.get(TOKEN_ENV) or None
    issues, failures = [], []
    for repo in args.repos:
        try:
            got = fetch_repo_issues(
                repo,
                token,
                include_comments=not args.no_comments,
                api_base=args.api_base,
                parallelism=args.parallelism,
            )
        except CredentialError as exc:
            raise CliError(EX_NOPERM, f"credentials rejected by {args.api_base}: {exc}; check {TOKEN_ENV}") from exc
        except (ForgeError, ValueError, OSError) as exc:
            failures.append((repo, str(exc)))
            continue
        issues.extend(got)
    if not args.keep_markup:
        issues = [_clean(i) for i in issues]
    kept = filter_issues(issues)
    _write(args.out, dumps_corpus(Corpus(tuple(kept), source="api")))
    print(f"fetched {len(issues)} issues, kept {len(kept)} -> {args.out}", file=out)
    for repo, why in failures:
        print(f"failed: {repo}: {why}", file=err)
    return EX_PARTIAL if failures else EX_OK


def cmd_classify(args, out, err) -> int:
    corpus = _corpus(args.corpus)
    lex = compile_lexicon(_lexicon(args.lexicon))
    fmt = args.format or ("ndjson" if Path(args.out).suffix.lower() in (".ndjson", ".jsonl") else "csv")
    dims = args.only or list(DIMENSIONS)
    idf = None
    if "quality_attribute" in dims:
        idf = build_idf_model(corpus.issues, lex, args.idf_scope)
    results = classify_corpus(corpus.issues, lex, idf, args.only, args.parallelism)
    _write(args.out, dumps_results(results, fmt))
    if results:
        shown = [d for d in DIMENSIONS if any(getattr(r, d) is not None for r in results)]
        for d in shown:
            print(render_distribution(distribution(results, d), args.table_style), file=out)
    print(f"classified {len(results)} issues -> {args.out}", file=out)
    return EX_OK


def cmd_sample(args, out, err) -> int:
    corpus = _corpus(args.corpus)
    preds = _predictions(args.predictions)
    missing = [i for i in corpus.issues if i.key not in preds]
    if missing:
        m = missing[0]
        raise CliError(EX_DATAERR, f"no prediction for {m.repo}#{m.number}")
    try:
        picked = stratified_sample(corpus, preds, args.fraction, args.strata, args.seed)
    except ValueError as exc:
        raise CliError(EX_DATAERR, str(exc)) from exc
    _write(args.out, dumps_corpus(picked))
    print(f"# seed={args.seed} fraction={args.fraction} strata={','.join(args.strata)}", file=out)
    print(f"sampled {len(picked)} of {len(corpus.issues)} issues -> {args.out}", file=out)
    return EX_OK


def cmd_evaluate(args, out, err) -> int:
    lex = _lexicon(args.lexicon)
    vocab = lex.vocabularies()
    _need_file(args.annotations, "annotations file")
    try:
        annotations = load_annotations(args.annotations, vocab)
    except AnnotationFormatError as exc:
        raise CliError(EX_DATAERR, str(exc)) from exc
    preds = _predictions(args.predictions)
    try:
        report = evaluate(annotations, preds, default_label_codes(vocab), vocab)
    except EvaluationError as exc:
        raise CliError(EX_DATAERR, str(exc)) from exc
    if args.out:
        _write(args.out, report.to_json())
    print(render_eval_report(report, args.table_style), file=out, end="")
    return EX_OK


def cmd_lexicon(args, out, err) -> int:
    if args.lexicon_command == "validate":
        lex = _lexicon(args.path)
        try:
            compile_lexicon(lex)
        except LexiconError as exc:
            raise CliError(EX_DATAERR, f"{args.path}: {exc}") from exc
        sizes = ", ".join(f"{d}: {len(v)} labels" for d, v in lex.vocabularies().items())
        print(f"{args.path}: ok ({sizes})", file=out)
        return EX_OK
    text = dump_lexicon(default_lexicon())
    if args.out:
        _write(args.out, text)
    else:
        out.write(text)
    return EX_OK


COMMANDS = {
    "fetch": cmd_fetch,
    "classify": cmd_classify,
    "sample": cmd_sample,
    "evaluate": cmd_evaluate,
    "lexicon": cmd_lexicon,
}


def main(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, out, err)
    except CliError as exc:
        print(f"qbug {args.command}: {exc}", file=err)
        return exc.code
    print(f"done in {time.perf_counter() - started:.2f}s", file=err)
    return code


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
