import numpy as np
import pytest

from swarmctl.config import ExperimentConfig
from swarmctl.dynamics import save_qmatrix
from swarmctl.experiment import fit_records
from swarmctl.gridsearch import collect, enumerate_grid

# Filled by test_acceptance; printed at the end of the session.
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def sweep_seed1():
    """Default-noise sweep with seed 1 and the global model fitted from it."""
    cfg = ExperimentConfig(seed=1)
    records = collect(enumerate_grid(), cfg.effective_plant(), cfg.seed)
    q, res, report = fit_records(records, cfg.learner)
    return records, q, res, report


@pytest.fixture(scope="session")
def q_file(sweep_seed1, tmp_path_factory):
    path = tmp_path_factory.mktemp("q") / "qglobal.qdyn"
    save_qmatrix(sweep_seed1[1], path)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
