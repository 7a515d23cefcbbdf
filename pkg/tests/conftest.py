import os

import pytest
from hypothesis import HealthCheck, settings

from pwsbif.normalform import build_transform, compute_invariants, locate_codim2
from pwsbif.system import get_system

settings.register_profile(
    "pwsbif", deadline=None, max_examples=25, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "pwsbif"))


@pytest.fixture(scope="session")
def nf():
    return get_system("example-nf")


@pytest.fixture(scope="session")
def raw():
    return get_system("example-raw")


@pytest.fixture(scope="session")
def inv(nf):
    return compute_invariants(nf)


@pytest.fixture(scope="session")
def codim2(raw):
    return locate_codim2(raw)


@pytest.fixture(scope="session")
def transform(raw, codim2):
    return build_transform(raw, codim2)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = next((m for m in list(sys.modules.values()) if hasattr(m, "ACCEPTANCE_RESULTS")), None)
    if mod is None or not mod.ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
