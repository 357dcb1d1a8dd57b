import numpy as np
import pytest

from kinetic_cpw.em import CpwGeometry, Material

ACCEPTANCE_MODULE = "test_acceptance.py"


@pytest.fixture
def tantalum():
    return Material(lambda0=150e-9, eps_r=10.55)


@pytest.fixture
def geom_3_10():
    return CpwGeometry(w=10e-6, s=3e-6, d=300e-9)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if ACCEPTANCE_MODULE not in nodeid or getattr(rep, "when", "call") not in ("call", "setup"):
                continue
            name = nodeid.split("::")[-1]
            if not name.startswith("test_criterion_"):
                continue
            number = int(name.split("_")[2])
            ok = status == "passed"
            outcomes[number] = outcomes.get(number, True) and ok
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(outcomes):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if outcomes[number] else 'FAIL'}")
