import numpy as np
import pytest

from proxybo.space import SearchSpaceSpec


@pytest.fixture
def cell():
    return SearchSpaceSpec(6, 5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


CALIBRATION_TARGETS = {"m040": -0.4, "m038": -0.38, "zero": 0.0, "p037": 0.37, "p070": 0.7, "p072": 0.72, "p074": 0.74}


@pytest.fixture(scope="session")
def calibrated_table():
    from proxybo.bench import SyntheticSpec, generate_synthetic

    return generate_synthetic(SyntheticSpec(SearchSpaceSpec(6, 5), CALIBRATION_TARGETS, name="calibrated"), seed=0)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
