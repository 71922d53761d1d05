from pathlib import Path

import pytest

from nerkit.bench import load_conll
from nerkit.model import StoreConnection
from nerkit.testing import MemoryCouchServer

DATA = Path(__file__).parent / "data"
FIXTURE = DATA / "fixture.conll"


@pytest.fixture
def fixture_corpus():
    return load_conll(FIXTURE)


@pytest.fixture
def couch():
    return MemoryCouchServer()


@pytest.fixture
def store(couch):
    couch.create_database("docs")
    return StoreConnection("http://couch.test:5984", "docs", transport=couch.transport)


@pytest.fixture
def no_sleep():
    delays = []
    return delays, delays.append


# -- acceptance reporting: one PASS/FAIL line per criterion -------------------------

_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    number, title = marker.args
    if report.when == "call" or report.failed:
        _criteria[number] = (title, "PASS" if report.passed else "FAIL", report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_criteria):
        title, status, duration = _criteria[number]
        terminalreporter.write_line(f"CRITERION {number:>2}: {status}  {title}  ({duration:.2f}s)")
