import sys

import numpy as np
import pytest

from contactbayes.density import fit_kde
from contactbayes.synth import ScenarioConfig, generate_fit_dataset


@pytest.fixture(scope="session")
def clean_models():
    contact, no_contact = generate_fit_dataset(ScenarioConfig())
    return fit_kde(contact, "C"), fit_kde(no_contact, "NC")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
