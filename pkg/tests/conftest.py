import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ultraspec import oracle as O
from ultraspec.model_core import HierModel

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CACHE: dict = {}


def cached_eigs(model: HierModel, spec: O.TruncationSpec, potential=None, key=None):
    """Jacobi spectrum of a truncation, computed once per session."""
    key = key or (model, spec, potential)
    if key not in _CACHE:
        _CACHE[key] = O.oracle_spectrum(model, spec, potential).eigenvalues
    return _CACHE[key]


@pytest.fixture
def lat1():
    return HierModel.lattice(2, 1.0)


@pytest.fixture
def lat05():
    return HierModel.lattice(2, 0.5)


@pytest.fixture
def field05():
    return HierModel.padic(2, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


ACCEPTANCE: dict[int, str] = {}


def record(n: int, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
