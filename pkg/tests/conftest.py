import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    key = props["criterion"]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA[key] = (report.outcome, props.get("title", ""), props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        outcome, title, detail = _CRITERIA[key]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{verdict}] criterion {key:>2}: {title}"
        if detail:
            line += f" | {detail}"
        tr.write_line(line)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Compile the numba kernels once so timed sections measure the work, not the JIT."""
    from switchcost import demand as dm
    from switchcost.market import MarketConfig
    from switchcost.oracle import mc_demand

    for n in (2, 3):
        cfg = MarketConfig.symmetric(n, 0.1)
        dm.derivative_bundle(cfg, [0.5] * n, 0)
        mc_demand(cfg, [0.5] * n, 1000, 0)
        dm.demand(cfg, [0.5] * n, 0, method="qmc")
    yield
