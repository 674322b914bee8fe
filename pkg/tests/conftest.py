import numpy as np
import pytest

from lance.model import CholeskyModel

_CRITERIA = []


def record_criterion(number, name, passed, detail=""):
    """``passed`` is True, False or None (skipped)."""
    status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
    line = f"criterion {number:>2} [{status}] {name}: {detail}"
    _CRITERIA.append((number, line))
    print(line)


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERIA):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_model(rng, p, kmax=None, dmin=0.5, dmax=3.0, scale=0.6):
    """Random banded model with bandwidths up to ``kmax``."""
    bands = [np.zeros(0)]
    for j in range(1, p):
        top = j if kmax is None else min(j, kmax)
        k = int(rng.integers(0, top + 1))
        bands.append(rng.uniform(-scale, scale, size=k))
    return CholeskyModel(tuple(bands), rng.uniform(dmin, dmax, size=p))
