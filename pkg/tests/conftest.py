import math

import pytest

from dampedwave.model import make_profile, validate_coefficients
from dampedwave.spectral import DomainSpec, build_basis

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def domain_pi():
    return DomainSpec(dim=1, lengths=(math.pi,), n_grid=255)


@pytest.fixture(scope="session")
def basis_pi(domain_pi):
    return build_basis(domain_pi)


@pytest.fixture(scope="session")
def small_basis():
    return build_basis(DomainSpec(dim=1, lengths=(math.pi,), n_grid=63))


@pytest.fixture(scope="session")
def ref_coeffs(basis_pi):
    return validate_coefficients(0.1, 0.1, 3, 1, basis_pi.lambda_1)


@pytest.fixture(scope="session")
def first_mode(basis_pi):
    return make_profile("first-mode", basis_pi)


@pytest.fixture
def acceptance_log():
    def log(name: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
