import time

import pytest

from qlhyper.catalog import builtin_system
from qlhyper.geometry import analyze_wld
from qlhyper.lifespan import builtin_family, compute_M0
from qlhyper.solver import GridConfig, epsilon_sweep

BURGERS_EPS = [0.1, 0.05, 0.025]


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for the terminal summary and echo it."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        request.config._acceptance_lines.append(line)
        print(line)
        return passed

    return record


@pytest.fixture(scope="session")
def burgers():
    return builtin_system("burgers")


@pytest.fixture(scope="session")
def burgers_prediction(burgers):
    family = builtin_family("gaussian-derivative")
    pred = compute_M0(burgers, analyze_wld(burgers), family)
    return family, pred


@pytest.fixture(scope="session")
def timed_burgers_sweep(burgers, burgers_prediction):
    family, pred = burgers_prediction
    start = time.perf_counter()
    res = epsilon_sweep(burgers, family, BURGERS_EPS, GridConfig(cells=2048), pred.alpha,
                        pred.M0, launch=(0, [pred.x_star]))
    return res, time.perf_counter() - start


@pytest.fixture(scope="session")
def burgers_sweep(timed_burgers_sweep):
    return timed_burgers_sweep[0]
