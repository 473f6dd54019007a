import numpy as np
import pytest
from hypothesis import strategies as st

from bellchip import counting, qstate

ACCEPTANCE_LINES = []


def random_density(rng, rank=4):
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_local_unitary(rng):
    def su2():
        q, r = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        return q * (np.diag(r) / np.abs(np.diag(r)))
    return np.kron(su2(), su2())


def exact_records(rho, n_per_unit=1e5, durations=None):
    """Expected (noise-free, non-integer) counts standing in for infinite statistics."""
    settings = counting.projector_set_16()
    if durations is None:
        durations = np.ones(len(settings))
    return [counting.CountRecord(s, n_per_unit * d * counting.coincidence_probability(rho, s), float(d))
            for s, d in zip(settings, durations)]


@st.composite
def model_params(draw, pure=None):
    a1 = draw(st.floats(0.0, 1.0))
    a2 = 1.0 - a1
    bound = np.sqrt(a1 * a2)
    frac = 1.0 if pure else draw(st.floats(0.0, 1.0))
    phase = draw(st.floats(0.0, 2 * np.pi))
    return qstate.ModelParams(a1, a2, complex(frac * bound * np.exp(1j * phase)))


@st.composite
def density_matrices(draw):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rank = draw(st.integers(1, 4))
    return random_density(np.random.default_rng(seed), rank)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_report():
    def report(number, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
