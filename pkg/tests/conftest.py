import re

_LINES: dict[int, str] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_", report.nodeid)
    if not m:
        return
    num = int(m.group(1))
    props = dict(report.user_properties)
    if report.when == "call" or (report.when == "setup" and report.failed):
        if "acceptance" in props:
            _LINES[num] = props["acceptance"]
        elif report.failed:
            _LINES[num] = f"[{num:2d}] FAIL  {report.nodeid.split('::')[-1]}: raised before a verdict"


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_LINES):
        terminalreporter.write_line(_LINES[num])
