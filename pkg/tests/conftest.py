import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qmcverify import checker, models  # noqa: E402
from qmcverify.mltl import parse  # noqa: E402

D = 20
SCHEDULE = (0.5, 0.25, 0.125, 0.0625)


@pytest.fixture(scope="session")
def qwalk_s1():
    return checker.ChainAnalysis.of(models.quantum_walk(models.WalkSpec(D, 1, "R")))


@pytest.fixture(scope="session")
def qwalk_s10():
    return checker.ChainAnalysis.of(models.quantum_walk(models.WalkSpec(D, 10, "R")))


@pytest.fixture(scope="session")
def cwalk_s1():
    return checker.ChainAnalysis.of(models.classical_walk(models.WalkSpec(D, 1)))


@pytest.fixture(scope="session")
def cwalk_s10():
    return checker.ChainAnalysis.of(models.classical_walk(models.WalkSpec(D, 10)))


@pytest.fixture(scope="session")
def qaps():
    return models.builtin_walk_aps(D)


@pytest.fixture(scope="session")
def caps():
    return models.builtin_walk_aps(D, coin=False)


PHI = {
    "phi0": "F G ap(abs0)",
    "phi1": "G ap(p20lt)",
    "phi2": "G (ap(p19gt) -> ap(p1gt))",
}
INSTANCES = {
    ("quantum", "phi0"): ("qwalk_s1", "qaps"),
    ("quantum", "phi1"): ("qwalk_s10", "qaps"),
    ("quantum", "phi2"): ("qwalk_s10", "qaps"),
    ("classical", "phi0"): ("cwalk_s1", "caps"),
    ("classical", "phi1"): ("cwalk_s10", "caps"),
    ("classical", "phi2"): ("cwalk_s10", "caps"),
}


@pytest.fixture(scope="session")
def table1_runs(request):
    """Verdicts of the six walk experiments along the halving schedule."""
    runs = {}
    for key, (chain, aps) in INSTANCES.items():
        analysis = request.getfixturevalue(chain)
        props = request.getfixturevalue(aps)
        phi = parse(PHI[key[1]], props)
        runs[key] = [checker.model_check(analysis.qmc, props, phi, eps, analysis=analysis) for eps in SCHEDULE]
    return runs


# One line per acceptance criterion in the terminal summary.

_CRITERION = re.compile(r"test_criterion_(\w+?)__")
_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    key = m.group(1)
    if report.when == "call" or report.outcome != "passed":
        prev = _outcomes.get(key, "PASS")
        _outcomes[key] = "PASS" if prev == "PASS" and report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_outcomes, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        terminalreporter.write_line(f"criterion {key}: {_outcomes[key]}")
