import os

import pytest

_RESULTS = {}
_TITLES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running test")


@pytest.fixture(scope="session", autouse=True)
def _scalar_cache(tmp_path_factory):
    os.environ.setdefault("FUNQ_CACHE_DIR", str(tmp_path_factory.mktemp("scalar-cache")))
    yield


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    _TITLES[number] = title
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        ok = rep.outcome == "passed" and not hasattr(rep, "wasxfail")
        _RESULTS.setdefault(number, []).append((item.name, ok))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        parts = _RESULTS[number]
        verdict = "PASS" if all(ok for _, ok in parts) else "FAIL"
        failed = [name for name, ok in parts if not ok]
        extra = f"  (failing: {', '.join(failed)})" if failed else ""
        tr.write_line(f"criterion {number:>2} [{_TITLES[number]}]: {verdict}{extra}")
