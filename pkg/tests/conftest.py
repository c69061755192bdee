from __future__ import annotations

import pytest

from urbancrime.kinetics import ModelParams, Variant, builtin_kinetics


@pytest.fixture(scope="session")
def kin():
    return builtin_kinetics("paper-default")


@pytest.fixture(scope="session")
def kin_const():
    return builtin_kinetics("constant-eta-linear-f")


@pytest.fixture
def table1():
    """A0 = 1, Bbar = 2, lambda0 = 0.1 on (0, 1), the basic 1D setting."""
    return ModelParams(1.0, 2.0, 0.1, 0.029, Variant.DEPARTURE)


@pytest.fixture
def square_params():
    """A0 = 1, Bbar = 3, lambda0 = 0.9, the basic 2D setting."""
    return ModelParams(1.0, 3.0, 0.9, 0.008, Variant.DEPARTURE)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
