import time

import pytest

from erevsim import cycles, ems, powertrain, sim

CYCLES = ("cbdc-synthetic", "ece15x5")
SCENARIOS = ("electric", "hybrid")

ACCEPTANCE_LINES = {}


class Matrix:
    """Lazily simulated (cycle, arch, scenario) runs shared by the whole session."""

    def __init__(self):
        self.archs = {k: powertrain.default_architecture(k) for k in powertrain.KINDS}
        self.cycles = {name: cycles.builtin_cycle(name) for name in CYCLES}
        self.traces = {}
        self.seconds = {}

    def trace(self, cycle, kind, scenario):
        key = (cycle, kind, scenario)
        if key not in self.traces:
            t0 = time.perf_counter()
            self.traces[key] = sim.simulate(self.archs[kind], self.cycles[cycle], ems.EmsConfig(), scenario)
            self.seconds[key] = time.perf_counter() - t0
        return self.traces[key]

    def indexes(self, cycle, kind, scenario):
        return sim.performance_indexes(self.trace(cycle, kind, scenario))


@pytest.fixture(scope="session")
def matrix():
    return Matrix()


@pytest.fixture(scope="session")
def archs(matrix):
    return matrix.archs


def record_acceptance(number, passed, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
