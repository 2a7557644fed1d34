import numpy as np
import pytest

from seqsmooth.experiments import FIG2_ALPHAS, fig2


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def fig2_results():
    """Holder-family expert study at desk scale: c = 0.4, sigma^2 = 0.01, 200 reps."""
    return {a: fig2(a, FIG2_ALPHAS, c=0.4, n=150, sigma2=0.01, reps=200, seed=0) for a in FIG2_ALPHAS}


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
