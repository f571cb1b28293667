import pytest

_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    tag = getattr(getattr(item, "function", None), "criterion", None)
    if tag is None:
        return
    failed = report.failed or (report.when == "call" and report.outcome != "passed")
    if failed or report.when == "call":
        number, title = tag
        prev = _criteria.get(number, (title, "PASS", ""))
        status = "FAIL" if failed or prev[1] == "FAIL" else "PASS"
        _criteria[number] = (title, status, f"{report.duration:.2f}s" if report.when == "call" else prev[2])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status, took = _criteria[number]
        terminalreporter.write_line(f"{status} criterion {number:>2}: {title} [{took}]")
