"""Shared fixtures and the acceptance-suite summary lines."""

import math

import numpy as np
import pytest

from vtangent import SpherePoint, parse_field

# nodeid fragment -> printed criterion label, in report order
_CRITERIA = (
    ("test_c1_", "C1 covariance closed form vs finite-difference oracle"),
    ("test_c2_", "C2 conditional determinant growth at l = 100, 200"),
    ("test_c3_", "C3 intensity against the leading-order density"),
    ("test_c4_", "C4 Monte Carlo mean vs analytic count at l = 10"),
    ("test_c5_", "C5 leading constant of the count growth law"),
    ("test_c6_", "C6 absolute moment closed form vs quadrature"),
    ("test_c7_", "C7 counter stability, re-verification, field rescaling"),
    ("test_c8_", "C8 byte-identical reruns across worker counts"),
)

_OUTCOMES = {
    "passed": "PASS",
    "failed": "FAIL",
    "error": "ERROR",
    "xfailed": "EXPECTED FAIL",
    "xpassed": "UNEXPECTED PASS",
    "skipped": "SKIPPED",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    seen = {}
    for category, label in _OUTCOMES.items():
        for report in terminalreporter.stats.get(category, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            for fragment, title in _CRITERIA:
                if fragment in nodeid:
                    seen[fragment] = (title, label)
    if not seen:
        return
    terminalreporter.write_line("")
    terminalreporter.write_sep("-", "acceptance criteria")
    for fragment, title in _CRITERIA:
        if fragment in seen:
            title, label = seen[fragment]
            terminalreporter.write_line(f"{label:15s} {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


@pytest.fixture(scope="session")
def fields():
    return {name: parse_field(name) for name in ("rotation", "zgrad", "tilted")}


def random_point(rng, margin=0.3):
    """Chart point away from the poles."""
    return SpherePoint(
        float(rng.uniform(0.0, 2.0 * math.pi)),
        float(rng.uniform(margin, math.pi - margin)),
    )
