from __future__ import annotations

from importlib import resources
from pathlib import Path

import pytest

from qbug.lexicon import compile_lexicon, default_lexicon

GOLDEN = Path(__file__).parent / "golden"
DATA = Path(__file__).parent / "data"


def synthetic_path(name: str) -> Path:
    return Path(str(resources.files("qbug.data").joinpath("synthetic", name)))


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture(scope="session")
def compiled(lexicon):
    return compile_lexicon(lexicon)


@pytest.fixture
def synthetic_corpus_path():
    return synthetic_path("corpus.ndjson")


@pytest.fixture
def synthetic_annotations_path():
    return synthetic_path("annotations.ndjson")


# acceptance criteria: one summary line per criterion after the run

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    entry = _criteria.setdefault(number, {"title": title, "ok": True})
    if report.failed:
        entry["ok"] = False


import pytest as _pytest  # noqa: E402


@_pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None and (rep.when == "call" or rep.failed):
        rep.criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']}")
