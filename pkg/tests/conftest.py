import functools
import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cmereduce import fixtures as F
from cmereduce.network import MolecularityWarning
from cmereduce.reduction import reduce_network

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CORPUS = Path(__file__).resolve().parents[1] / "src" / "cmereduce" / "corpus"
GOLDEN = Path(__file__).resolve().parent / "golden"

# Fixtures small enough to reduce in full; PFK is replaced by a scaled copy.
SMALL_FIXTURES = {
    "ab": lambda: F.ab(5, 1),
    "birthdeath": F.birthdeath,
    "inputAB": F.input_ab,
    "wilhelm": F.wilhelm,
    "triangular": F.triangular,
    "triangular3": lambda: F.triangular(3),
    "triangular5": lambda: F.triangular(5),
    "network1": F.network1,
    "network2": F.network2,
    "network3": F.network3,
    "motor_cw": F.motor,
    "motor_ccw": lambda: F.motor(clockwise=False),
    "enzyme": F.enzyme,
    "pfk_scaled": lambda: F.pfk(init=(10, 2, 0, 2, 0, 10, 2, 0, 0)),
}


@functools.lru_cache(maxsize=None)
def reduction_of(name):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MolecularityWarning)
        return reduce_network(SMALL_FIXTURES[name]())


@pytest.fixture(params=sorted(SMALL_FIXTURES))
def any_reduction(request):
    return reduction_of(request.param)


def point_mass(n, i=0):
    p = np.zeros(n)
    p[i] = 1.0
    return p


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
