import sys

import numpy as np
import pytest

from upsc import AdmittanceModel, ControllerParams


@pytest.fixture
def base():
    return ControllerParams()


@pytest.fixture
def base_model():
    return AdmittanceModel.from_params()


@pytest.fixture
def loaded_model():
    return AdmittanceModel.from_params(P_ref=1.0, Q_ref=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
