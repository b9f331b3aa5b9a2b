import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from urbanlabel.core import LabeledCloud  # noqa: E402
from urbanlabel.raster import ElevationRaster  # noqa: E402

# Filled by tests/test_acceptance.py; printed once at the end of the session.
ACCEPTANCE_RESULTS = {}


def record_acceptance(number, title, ok, detail=""):
    ACCEPTANCE_RESULTS[number] = (title, bool(ok), detail)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}" + (f" ({detail})" if detail else "")
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, ok, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}"
                                    + (f" ({detail})" if detail else ""))


def make_cloud(xyz, label=None, origin=(0.0, 0.0), tile_size=50.0):
    xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
    return LabeledCloud(xyz[:, 0], xyz[:, 1], xyz[:, 2], label, tile_origin=origin, tile_size=tile_size)


def flat_raster(z=2.0, n=20, cell=0.5, origin=(0.0, 0.0)):
    return ElevationRaster(origin, cell, np.full((n, n), float(z)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
