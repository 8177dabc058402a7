import pytest
from hypothesis import settings

settings.register_profile("zsnas", deadline=None)
settings.load_profile("zsnas")

# criterion number -> list of (test name, outcome)
_CRITERIA: dict[int, list[tuple[str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        item.config._criterion_titles = getattr(item.config, "_criterion_titles", {})
        item.config._criterion_titles[marker.args[0]] = marker.args[1]
        _CRITERIA.setdefault(marker.args[0], []).append((item.name, rep.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    titles = getattr(config, "_criterion_titles", {})
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        outcomes = [o for _, o in _CRITERIA[n]]
        if "failed" in outcomes:
            verdict = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        failed = [name for name, o in _CRITERIA[n] if o == "failed"]
        extra = f"  (failed: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {n:>2}: {verdict}  {titles.get(n, '')}{extra}")
