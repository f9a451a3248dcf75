import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile('default', deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile('default')

# name -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def record(name, passed, detail=''):
    ACCEPTANCE[name] = (bool(passed), detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section('acceptance criteria')
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f'{"PASS" if ok else "FAIL"}  {name}: {detail}')


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def stable_matrix(rng, n, shift=-3.0, scale=0.5, complex_=True):
    """Random matrix with spectrum around ``shift`` (left half-plane by default)."""
    M = crandn(rng, n, n) if complex_ else rng.standard_normal((n, n))
    return shift * np.eye(n) + scale * M / np.sqrt(n)


def rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
