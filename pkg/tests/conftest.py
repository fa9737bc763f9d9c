import numpy as np
import pytest

from semcompress.classifiers import train_rbf_svm
from semcompress.worldgen import WorldConfig, build_mixture, sample_labeled


@pytest.fixture(scope="session")
def world():
    return build_mixture(WorldConfig())


@pytest.fixture(scope="session")
def small_data(world):
    return sample_labeled(world, 3000, np.random.default_rng(123))


@pytest.fixture(scope="session")
def global_f(small_data):
    return train_rbf_svm(small_data.subset(slice(0, 1500)), C=10.0, gamma=30.0, tol=1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


# one line per acceptance criterion in the terminal summary
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
