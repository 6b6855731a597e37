import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from specforge.algebra import Operator
from specforge.models import build_coupled_oscillators, build_two_level

settings.register_profile("specforge", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("specforge")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_level():
    return build_two_level(2.0)


@pytest.fixture
def dimer():
    return build_coupled_oscillators(2.0, 2.0, 0.1, 1.0, 0.0)


def random_hermitian(rng, n: int) -> Operator:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return Operator((a + a.conj().T) / 2)


def random_density(rng, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one acceptance line and fail the test when the criterion fails."""
    lines = request.config.stash[_ACCEPTANCE]

    def report(number: int, title: str, ok: bool, detail: str):
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        lines.append((number, line))
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
