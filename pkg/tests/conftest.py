import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def report(request):
    """Attach measured values to the acceptance line of the current test."""
    marker = request.node.get_closest_marker("criterion")
    details: list[str] = []
    if marker is not None:
        _RESULTS.setdefault(marker.args[0], {"title": marker.args[1], "details": details})
    return details.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    entry = _RESULTS.setdefault(marker.args[0], {"title": marker.args[1], "details": []})
    entry["passed"] = rep.passed
    if rep.failed:
        entry["reason"] = str(call.excinfo.value).splitlines()[0] if call.excinfo else "failed"


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        status = "PASS" if entry.get("passed") else "FAIL"
        detail = "; ".join(entry["details"])
        if not entry.get("passed") and entry.get("reason"):
            detail = f"{detail}; {entry['reason']}" if detail else entry["reason"]
        terminalreporter.write_line(f"[{status}] criterion {number}: {entry['title']}"
                                    + (f" -- {detail}" if detail else ""))
