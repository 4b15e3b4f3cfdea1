"""Shared pytest plumbing: per-criterion pass/fail lines for the acceptance suite.

Tests marked ``@pytest.mark.criterion("<label>")`` get one ``[PASS]``/``[FAIL]``
line each in a dedicated terminal section after the run, so the acceptance
status is readable without scanning the full test listing.
"""
import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(label): acceptance criterion; reported as one pass/fail line",
    )
    config._criterion_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not marker.args:
        return
    label = str(marker.args[0])
    # A criterion fails on its own assertion (call phase) or if its fixtures
    # could not be built (setup phase); teardown noise is not a verdict.
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        item.config._criterion_results.append((label, report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criterion_results", [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in results:
        tag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{tag}] {label}")
