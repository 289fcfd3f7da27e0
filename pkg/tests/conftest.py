import functools

import pytest

from smibpss import ControllerKind, MachineParams, OperatingPoint, fault_scenario, run_scenario
from smibpss.config import bundled_config_path
from smibpss.model import compute_coefficients, compute_equilibrium


@pytest.fixture(scope="session")
def params():
    return MachineParams()


@pytest.fixture(scope="session")
def op():
    return OperatingPoint()


@pytest.fixture(scope="session")
def eq(params, op):
    return compute_equilibrium(params, op)


@pytest.fixture(scope="session")
def coeffs(params, eq):
    return compute_coefficients(params, eq)


@pytest.fixture(scope="session")
def config_path():
    return bundled_config_path()


@functools.lru_cache(maxsize=None)
def reference_fault(kind: ControllerKind, limits=None):
    """Fault 0.6-0.78 s at the default dispatch, cached across tests."""
    kw = {} if limits is None else {"angle_limits": limits}
    return run_scenario(fault_scenario(kind), MachineParams(), OperatingPoint(), **kw)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
