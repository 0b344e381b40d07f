import math

import pytest

from fsens import inputs


@pytest.fixture
def ishigami_inputs():
    return inputs.IndependentInputs([inputs.Uniform(-math.pi, math.pi)] * 3)


@pytest.fixture
def gaussian6():
    return inputs.IndependentInputs([inputs.Gaussian(0.0, 1.0)] * 6)


# acceptance outcomes, filled by tests/test_acceptance.py and echoed after the run
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
