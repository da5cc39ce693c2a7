"""Issue acquisition, filtering, markup stripping and NDJSON persistence."""

from __future__ import annotations

import json
import logging
import os
import re
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import requests

log = logging.getLogger(__name__)

STATES = ("open", "closed", "resolved", "fixed")
RECORD_FIELDS = (
    "repo", "number", "forge_id", "title", "body", "comments_text", "labels",
    "state", "comment_count", "created_at", "closed_at", "url",
)
TOKEN_ENV = "QBUG_FORGE_TOKEN"
DEFAULT_API_BASE = "https://api.github.com"
_REPO_RE = re.compile(r"^[A-Za-z0-9_.-]+/[A-Za-z0-9_.-]+$")


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------


def parse_timestamp(value: str | None) -> datetime | None:
    if value is None or value == "":
        return None
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime | None) -> str | None:
    if dt is None:
        return None
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _clean_labels(labels: Iterable[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(str(l).strip().lower() for l in labels if str(l).strip()))


@dataclass(frozen=True)
class Issue:
    repo: str
    number: int
    title: str = ""
    body: str = ""
    comments_text: tuple[str, ...] = ()
    labels: tuple[str, ...] = ()
    state: str = "open"
    comment_count: int = 0
    created_at: datetime | None = None
    closed_at: datetime | None = None
    url: str = ""
    forge_id: int = 0

    def __post_init__(self):
        if isinstance(self.number, bool) or not isinstance(self.number, int) or self.number <= 0:
            raise ValueError(f"issue number must be a positive integer, got {self.number!r}")
        state = str(self.state).lower()
        if state not in STATES:
            raise ValueError(f"unknown issue state {self.state!r}")
        if self.comment_count < 0:
            raise ValueError("comment_count must be non-negative")
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "labels", _clean_labels(self.labels))
        object.__setattr__(self, "comments_text", tuple(self.comments_text))

    @property
    def key(self) -> tuple[str, int]:
        return (self.repo, self.number)

    def to_record(self) -> dict:
        return {
            "repo": self.repo,
            "number": self.number,
            "forge_id": self.forge_id,
            "title": self.title,
            "body": self.body,
            "comments_text": list(self.comments_text),
            "labels": list(self.labels),
            "state": self.state,
            "comment_count": self.comment_count,
            "created_at": format_timestamp(self.created_at),
            "closed_at": format_timestamp(self.closed_at),
            "url": self.url,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Issue":
        missing = [f for f in ("repo", "number") if f not in rec]
        if missing:
            raise ValueError(f"missing field(s): {', '.join(missing)}")
        unknown = set(rec) - set(RECORD_FIELDS)
        if unknown:
            raise ValueError(f"unknown field(s): {', '.join(sorted(unknown))}")
        comments = rec.get("comments_text") or []
        return cls(
            repo=str(rec["repo"]),
            number=rec["number"],
            forge_id=int(rec.get("forge_id") or 0),
            title=rec.get("title") or "",
            body=rec.get("body") or "",
            comments_text=tuple(comments),
            labels=tuple(rec.get("labels") or ()),
            state=rec.get("state") or "open",
            comment_count=int(rec.get("comment_count", len(comments)) or 0),
            created_at=parse_timestamp(rec.get("created_at")),
            closed_at=parse_timestamp(rec.get("closed_at")),
            url=rec.get("url") or "",
        )


@dataclass(frozen=True)
class Corpus:
    """Issues sorted by (repo, number). ``source`` and ``fetched_at`` are
    provenance only and do not take part in equality."""

    issues: tuple[Issue, ...] = ()
    source: str = field(default="file", compare=False)
    fetched_at: datetime | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.source not in ("api", "file"):
            raise ValueError(f"unknown corpus source {self.source!r}")
        ordered = tuple(sorted(self.issues, key=lambda i: i.key))
        for a, b in zip(ordered, ordered[1:]):
            if a.key == b.key:
                raise ValueError(f"duplicate issue {a.repo}#{a.number}")
        object.__setattr__(self, "issues", ordered)

    def __iter__(self):
        return iter(self.issues)

    def __len__(self) -> int:
        return len(self.issues)

    def by_key(self) -> dict[tuple[str, int], Issue]:
        return {i.key: i for i in self.issues}


# --------------------------------------------------------------------------
# markup stripping and filtering
# --------------------------------------------------------------------------

_FENCE_LINE = re.compile(r"^[ \t]*(```|~~~)[^\n]*$", re.MULTILINE)
_IMAGE = re.compile(r"!\[([^\]\n]*)\]\([^)\n]*\)")
_LINK = re.compile(r"\[([^\]\n]*)\]\([^)\n]*\)")
_REF_LINK = re.compile(r"\[([^\]\n]*)\]\[[^\]\n]*\]")
_HTML_TAG = re.compile(r"</?[A-Za-z][^<>]*>|<!--.*?-->", re.DOTALL)
_HEADING = re.compile(r"^[ \t]*#{1,6}(?=[ \t]|$)", re.MULTILINE)
_BLOCKQUOTE = re.compile(r"^[ \t]*>+", re.MULTILINE)
_STRONG = re.compile(r"(\*\*|__)(?=\S)(.+?)(?<=\S)\1")
_EM_STAR = re.compile(r"(?<![\w*])\*(?=\S)([^*\n]+?)(?<=\S)\*(?![\w*])")
_EM_UNDER = re.compile(r"(?<![A-Za-z0-9_])_(?=\S)([^_\n]+?)(?<=\S)_(?![A-Za-z0-9_])")
_STRIKE = re.compile(r"~~(?=\S)(.+?)(?<=\S)~~")
_WS = re.compile(r"\s+")


def _strip_once(text: str) -> str:
    text = _FENCE_LINE.sub("", text)
    text = text.replace("`", "")
    text = _HTML_TAG.sub(" ", text)
    text = _IMAGE.sub(r"\1", text)
    text = _LINK.sub(r"\1", text)
    text = _REF_LINK.sub(r"\1", text)
    text = _HEADING.sub("", text)
    text = _BLOCKQUOTE.sub("", text)
    text = _STRONG.sub(r"\2", text)
    text = _STRIKE.sub(r"\1", text)
    text = _EM_STAR.sub(r"\1", text)
    text = _EM_UNDER.sub(r"\1", text)
    return _WS.sub(" ", text).strip()


def strip_markup(text: str) -> str:
    """Reduce Markdown/HTML to visible text. Casing is preserved.

    >>> strip_markup("## Bug\\n`qc.h(0)` **fails**")
    'Bug qc.h(0) fails'
    """
    if not text:
        return ""
    # rules can expose new markup (nested links), so iterate to a fixed point;
    # every pass either shortens the text or leaves it unchanged
    prev = None
    while text != prev:
        prev, text = text, _strip_once(text)
    return text


@dataclass(frozen=True)
class FilterRules:
    exclude_labels: frozenset[str] = frozenset({"duplicate"})
    drop_empty_body: bool = True
    drop_duplicates: bool = True


def filter_issues(issues: Sequence[Issue], rules: FilterRules | None = None) -> list[Issue]:
    """Drop empty, duplicated and label-excluded issues; order is preserved."""
    rules = rules or FilterRules()
    far_future = datetime.max.replace(tzinfo=timezone.utc)
    keep = [True] * len(issues)

    for i, issue in enumerate(issues):
        if rules.drop_empty_body and not issue.body.strip():
            keep[i] = False
        elif rules.exclude_labels & set(issue.labels):
            keep[i] = False

    if rules.drop_duplicates:
        winner: dict[tuple[str, str], int] = {}
        for i, issue in enumerate(issues):
            if not keep[i]:
                continue
            k = (issue.title, issue.body)
            j = winner.get(k)
            if j is None:
                winner[k] = i
                continue
            ti = issue.created_at or far_future
            tj = issues[j].created_at or far_future
            if ti < tj:
                keep[j] = False
                winner[k] = i
            else:
                keep[i] = False

    return [issue for i, issue in enumerate(issues) if keep[i]]


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------


class CorpusFormatError(ValueError):
    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


_UMASK = os.umask(0)
os.umask(_UMASK)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def dumps_corpus(corpus: Corpus | Iterable[Issue]) -> str:
    return "".join(
        json.dumps(issue.to_record(), ensure_ascii=False) + "\n" for issue in corpus
    )


def save_corpus(corpus: Corpus | Iterable[Issue], path: str | Path) -> None:
    atomic_write_text(path, dumps_corpus(corpus))


def load_corpus(path: str | Path) -> Corpus:
    path = str(path)
    issues = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise ValueError("record is not an object")
                issues.append(Issue.from_record(rec))
            except (ValueError, TypeError) as exc:
                raise CorpusFormatError(path, lineno, str(exc)) from exc
    try:
        return Corpus(tuple(issues), source="file")
    except ValueError as exc:
        raise CorpusFormatError(path, 0, str(exc)) from exc


# --------------------------------------------------------------------------
# forge client
# --------------------------------------------------------------------------


class ForgeError(RuntimeError):
    pass


class CredentialError(ForgeError):
    pass


class UnknownRepoError(ForgeError):
    pass


class RateLimitError(ForgeError):
    """Rate limit exhausted; retry after ``reset_at`` (epoch seconds)."""

    retryable = True

    def __init__(self, message: str, reset_at: float | None):
        self.reset_at = reset_at
        super().__init__(message)


class ForgeClient:
    """Minimal REST client for issue listing.

    Comment requests run concurrently up to ``parallelism``; a rate-limit
    response blocks every worker until the advertised reset time.
    """

    per_page = 100

    def __init__(
        self,
        api_base: str = DEFAULT_API_BASE,
        token: str | None = None,
        session: requests.Session | None = None,
        parallelism: int = 4,
        max_wait: float = 3600.0,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.time,
        timeout: float = 30.0,
    ):
        self.api_base = api_base.rstrip("/")
        self.token = token
        self.session = session or requests.Session()
        self.parallelism = max(1, parallelism)
        self.max_wait = max_wait
        self.sleep = sleep
        self.clock = clock
        self.timeout = timeout
        self._gate = threading.Lock()
        self._blocked_until = 0.0

    def _headers(self) -> dict:
        h = {"Accept": "application/vnd.github+json"}
        if self.token:
            h["Authorization"] = f"Bearer {self.token}"
        return h

    def _wait_for_gate(self) -> None:
        with self._gate:
            delay = self._blocked_until - self.clock()
        if delay > 0:
            self.sleep(delay)

    def _rate_limit_reset(self, resp: requests.Response) -> float | None:
        if resp.status_code not in (403, 429):
            return None
        retry_after = resp.headers.get("Retry-After")
        if retry_after is not None:
            try:
                return self.clock() + float(retry_after)
            except ValueError:
                pass
        if resp.headers.get("X-RateLimit-Remaining") == "0":
            try:
                return float(resp.headers.get("X-RateLimit-Reset", "0"))
            except ValueError:
                return self.clock() + 60.0
        return None

    def get_json(self, path: str, params: dict | None = None):
        url = f"{self.api_base}{path}"
        while True:
            self._wait_for_gate()
            try:
                resp = self.session.get(
                    url, params=params, headers=self._headers(), timeout=self.timeout
                )
            except requests.RequestException as exc:
                raise ForgeError(f"request to {url} failed: {exc}") from exc

            reset_at = self._rate_limit_reset(resp)
            if reset_at is not None:
                wait = max(0.0, reset_at - self.clock())
                if not self.token:
                    raise RateLimitError(
                        f"rate limit exhausted; retry after {format_timestamp(datetime.fromtimestamp(reset_at, timezone.utc))} "
                        f"or set {TOKEN_ENV}",
                        reset_at,
                    )
                if wait > self.max_wait:
                    raise RateLimitError(f"rate limit reset is {wait:.0f}s away", reset_at)
                log.warning("rate limited; waiting %.0fs", wait)
                with self._gate:
                    self._blocked_until = max(self._blocked_until, reset_at)
                continue

            if resp.status_code == 401 or resp.status_code == 403:
                raise CredentialError(f"forge rejected credentials ({resp.status_code}) for {url}")
            if resp.status_code == 404:
                raise UnknownRepoError(f"not found: {url}")
            if resp.status_code >= 400:
                raise ForgeError(f"HTTP {resp.status_code} from {url}")
            return resp.json()

    def _paged(self, path: str, params: dict | None = None) -> list:
        out = []
        page = 1
        while True:
            batch = self.get_json(path, {**(params or {}), "per_page": self.per_page, "page": page})
            if not isinstance(batch, list):
                raise ForgeError(f"unexpected payload from {path}")
            out.extend(batch)
            if len(batch) < self.per_page:
                return out
            page += 1

    def list_issues(self, repo: str) -> list[dict]:
        return self._paged(f"/repos/{repo}/issues", {"state": "all"})

    def list_comments(self, repo: str, number: int) -> list[str]:
        return [c.get("body") or "" for c in self._paged(f"/repos/{repo}/issues/{number}/comments")]


def _issue_from_api(repo: str, item: dict, comments: list[str] | None) -> Issue:
    count = int(item.get("comments") or 0)
    if comments is not None:
        count = len(comments)
    return Issue(
        repo=repo,
        number=int(item["number"]),
        forge_id=int(item.get("id") or 0),
        title=item.get("title") or "",
        body=item.get("body") or "",
        comments_text=tuple(comments or ()),
        labels=tuple(
            (l.get("name") if isinstance(l, dict) else l) or "" for l in item.get("labels") or ()
        ),
        state=item.get("state") or "open",
        comment_count=count,
        created_at=parse_timestamp(item.get("created_at")),
        closed_at=parse_timestamp(item.get("closed_at")),
        url=item.get("html_url") or item.get("url") or "",
    )


def fetch_repo_issues(
    repo: str,
    auth_token: str | None = None,
    include_comments: bool = True,
    *,
    api_base: str = DEFAULT_API_BASE,
    client: ForgeClient | None = None,
    parallelism: int = 4,
) -> list[Issue]:
    """Fetch every issue (pull requests excluded) of ``owner/name``."""
    if not _REPO_RE.match(repo):
        raise ValueError(f"repository must look like owner/name, got {repo!r}")
    client = client or ForgeClient(api_base, auth_token, parallelism=parallelism)
    items = [it for it in client.list_issues(repo) if "pull_request" not in it]

    if not include_comments:
        return [_issue_from_api(repo, it, None) for it in items]

    def comments_for(it: dict) -> list[str]:
        if not int(it.get("comments") or 0):
            return []
        return client.list_comments(repo, int(it["number"]))

    with ThreadPoolExecutor(max_workers=client.parallelism) as pool:
        all_comments = list(pool.map(comments_for, items))
    return [_issue_from_api(repo, it, c) for it, c in zip(items, all_comments)]
