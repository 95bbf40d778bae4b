import pytest

_RESULTS: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    criterion = marker.kwargs.get("criterion")
    details = [str(v) for k, v in item.user_properties if k == "detail"]
    _RESULTS.setdefault(criterion, []).append((item.name, report.passed, details))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_RESULTS):
        runs = _RESULTS[criterion]
        status = "PASS" if all(ok for _, ok, _ in runs) else "FAIL"
        detail = "; ".join(d for _, _, ds in runs for d in ds)
        terminalreporter.write_line(f"criterion {criterion:2d}: {status}  {detail}")
