"""Acceptance summary: one PASS/FAIL line per criterion after the run."""
import re

CRITERIA = {
    1: "maximum ergotropy",
    2: "stable adiabatic charging",
    3: "stable charging-speed ordering",
    4: "unstable power enhancement",
    5: "self-discharge oracle equivalence",
    6: "supercapacitor classification",
    7: "brachistochrone criticality",
    8: "numerical conservation",
    9: "tomography round trip",
}

_results = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_runtest_logreport(report):
    match = _PATTERN.search(report.nodeid)
    if not match:
        return
    number = int(match.group(1))
    if report.when == "call" or (report.when == "setup" and report.failed):
        detail = dict(report.user_properties).get("detail", "")
        if report.failed and report.longrepr is not None:
            crash = getattr(report.longrepr, "reprcrash", None)
            reason = crash.message.splitlines()[0] if crash is not None else str(report.longrepr).splitlines()[-1]
            detail = f"{detail} | {reason}" if detail else reason
        _results[number] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in CRITERIA.items():
        status, detail = _results.get(number, ("NOT RUN", ""))
        terminalreporter.write_line(f"criterion {number} {status:<4} {title}: {detail}")
