import pytest

_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(tag, title): release-gate criterion")


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("acceptance")
    if marker and (report.when == "call" or (report.when == "setup" and not report.passed)):
        _ACCEPTANCE.append((marker.args[0], marker.args[1], report.outcome))
    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for tag, title, outcome in sorted(_ACCEPTANCE, key=lambda r: int(r[0][2:])):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{tag:<5} {status}  {title}")
