import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

_acceptance: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        state = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        previous = _acceptance.get(number)
        # a criterion with several checks passes only if every check passes
        if previous is None or previous[1] == "PASS":
            _acceptance[number] = (title, state)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, state = _acceptance[number]
        terminalreporter.write_line(f"[{state}] criterion {number:>2}: {title}")
