import time

import pytest

from dataext import SweepPlan, TrainConfig, example1_spec, example2_spec, grid_axis, run_sweep

AXIS = (0, 100, 1_000, 10_000, 100_000)

_ACCEPTANCE = []


def record_criterion(number, name, passed, detail=""):
    _ACCEPTANCE.append((number, name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(_ACCEPTANCE, key=lambda r: (r[0], r[1])):
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] {number}. {name}" + (f" -- {detail}" if detail else ""))


def timed_sweep(spec, n_a, config=None, trials=10, seed=0):
    plan = SweepPlan(spec, grid_axis({"A": n_a}, "B", AXIS), config or TrainConfig(), trials=trials, seed=seed)
    start = time.perf_counter()
    surface = run_sweep(plan)
    return surface, time.perf_counter() - start


@pytest.fixture(scope="session")
def example1_surface():
    return timed_sweep(example1_spec(), 100)


@pytest.fixture(scope="session")
def example2_surface():
    return timed_sweep(example2_spec(), 100)


@pytest.fixture(scope="session")
def example2_surface_large_a():
    return timed_sweep(example2_spec(), 10_000)
