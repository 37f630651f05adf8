import pytest

from mbcdt.lattice import ModelParams, build_lattice

from oracles import N, OMEGA, V_TUNNEL


@pytest.fixture
def base_params():
    return ModelParams(N, V_TUNNEL, 0.0, OMEGA)


@pytest.fixture
def driven_model():
    return build_lattice(ModelParams(N, V_TUNNEL, 0.2, OMEGA))


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
