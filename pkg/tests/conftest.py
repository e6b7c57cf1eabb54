import pytest

_outcomes: dict[int, list[bool]] = {}


def pytest_addoption(parser):
    parser.addoption("--fast", action="store_true", default=False,
                     help="phase-diagram acceptance at alpha=0.05 with tolerance 0.05")


@pytest.fixture
def fast(request):
    return request.config.getoption("--fast")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(marker.args[0], []).append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        verdict = "PASS" if all(_outcomes[n]) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}")
