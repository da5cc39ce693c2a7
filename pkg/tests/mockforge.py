"""Tiny in-process forge API used by corpus and CLI tests."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse


def make_issue(number: int, *, pr: bool = False, comments: int = 0, body: str | None = None, labels=()):
    item = {
        "id": 10_000 + number,
        "number": number,
        "title": f"Issue {number}: qubit **measurement** fails",
        "body": body if body is not None else f"Body of issue {number} with `code` and [a link](http://x.y)",
        "labels": [{"name": l} for l in labels],
        "state": "closed" if number % 3 == 0 else "open",
        "comments": comments,
        "created_at": f"2023-01-{1 + number % 28:02d}T00:00:00Z",
        "closed_at": "2023-02-01T00:00:00Z" if number % 3 == 0 else None,
        "html_url": f"https://forge.invalid/o/r/issues/{number}",
    }
    if pr:
        item["pull_request"] = {"url": "x"}
    return item


class MockForge:
    def __init__(self, repos: dict, comments: dict | None = None, token: str | None = None):
        self.repos = repos
        self.comments = comments or {}
        self.token = token
        self.rate_limit_once = False
        self.requests: list[str] = []
        self._lock = threading.Lock()
        forge = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, code, payload, headers=None):
                data = json.dumps(payload).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                for k, v in (headers or {}).items():
                    self.send_header(k, v)
                self.end_headers()
                self.wfile.write(data)

            def do_GET(self):
                url = urlparse(self.path)
                with forge._lock:
                    forge.requests.append(self.path)
                    limited = forge.rate_limit_once
                    forge.rate_limit_once = False
                if limited:
                    return self._send(429, {"message": "slow down"}, {"Retry-After": "0"})
                if forge.token is not None:
                    if self.headers.get("Authorization") != f"Bearer {forge.token}":
                        return self._send(401, {"message": "Bad credentials"})
                q = parse_qs(url.query)
                page = int(q.get("page", ["1"])[0])
                per = int(q.get("per_page", ["30"])[0])
                parts = url.path.strip("/").split("/")
                if len(parts) == 4 and parts[0] == "repos" and parts[3] == "issues":
                    repo = f"{parts[1]}/{parts[2]}"
                    if repo not in forge.repos:
                        return self._send(404, {"message": "Not Found"})
                    items = forge.repos[repo]
                elif len(parts) == 6 and parts[3] == "issues" and parts[5] == "comments":
                    repo = f"{parts[1]}/{parts[2]}"
                    items = [{"body": b} for b in forge.comments.get((repo, int(parts[4])), [])]
                else:
                    return self._send(404, {"message": "Not Found"})
                self._send(200, items[(page - 1) * per : page * per])

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
