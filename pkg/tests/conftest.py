import os

import pytest
from hypothesis import settings

from qgram_art.qgram_core import TestCase

settings.register_profile("default", deadline=None, max_examples=100)
settings.register_profile("ci", deadline=None, max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def t1():
    return TestCase.of("goToFind", "goToIndex")


@pytest.fixture
def w1():
    return TestCase.of(("findOwner", "John"), "goToIndex")


@pytest.fixture
def w2():
    return TestCase.of("goToFind", ("find", 1), "goToFind", ("find", 2))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion reported in the summary")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and report.passed):
        return
    n, title = mark.args
    results = item.config._criteria
    ok = report.passed and results.get(n, (title, True))[1]
    results[n] = (title, ok)


def pytest_terminal_summary(terminalreporter, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, ok = results[n]
        terminalreporter.write_line(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}")
