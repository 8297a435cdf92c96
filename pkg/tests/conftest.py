import numpy as np
import pytest

from divtest.simplex import make_distribution

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def p_flag():
    return make_distribution([0.7, 0.3])


@pytest.fixture
def q_flag():
    return make_distribution([0.5, 0.5])


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_interior(rng, k, min_entry=0.05):
    """Dirichlet(1) draw conditioned on every entry being >= min_entry."""
    while True:
        x = rng.dirichlet(np.ones(k))
        if x.min() >= min_entry:
            return make_distribution(x / x.sum())


@pytest.fixture
def acceptance_log():
    def log(label: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
