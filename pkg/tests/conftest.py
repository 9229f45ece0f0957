import math
import sys

import numpy as np
import pytest

from conicpoint.calibration import CalibrationMatrix


def random_k(rng, square=False, skew=True):
    f = rng.uniform(200, 2000)
    if square:
        return CalibrationMatrix.square(f, rng.uniform(200, 800), rng.uniform(150, 600))
    fy = f * rng.uniform(0.7, 1.4)
    s = rng.uniform(-0.05, 0.05) * f if skew else 0.0
    return CalibrationMatrix(f, fy, s, rng.uniform(200, 800), rng.uniform(150, 600))


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def ray_angle(k, x1, x2):
    a = np.linalg.solve(k.matrix, x1)
    b = np.linalg.solve(k.matrix, x2)
    return math.acos(np.clip(a @ b / np.linalg.norm(a) / np.linalg.norm(b), -1, 1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(results, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
