import numpy as np
import pytest

REFERENCE_DIRECTION = np.array([0.490, -0.631, 0.602])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_unit(rng, n=None):
    v = rng.normal(size=(3,) if n is None else (n, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_ball(rng, max_radius=1.0):
    return random_unit(rng) * max_radius * rng.uniform() ** (1 / 3)


# one line per acceptance criterion, repeated as a block at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
