import pytest

from ordzero.cs_builder import build_cs
from ordzero.dispatcher import build_dispatchers
from ordzero.dynamics import assemble_F
from ordzero.products import Schedule

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def show_schedule():
    return Schedule.from_sequences([4, 8, 4], [2, 2, 4], start_index=2)


@pytest.fixture(scope="session")
def show_cs(show_schedule):
    return build_cs(show_schedule)


@pytest.fixture(scope="session")
def show_dispatchers(show_schedule):
    return build_dispatchers(show_schedule)


@pytest.fixture(scope="session")
def show_F(show_cs, show_dispatchers):
    return assemble_F(show_cs, show_dispatchers)


@pytest.fixture(scope="session")
def small_schedule():
    return Schedule.from_sequences([2, 3], [1, 1], start_index=2)


@pytest.fixture(scope="session")
def small_F(small_schedule):
    cs = build_cs(small_schedule)
    return assemble_F(cs, build_dispatchers(small_schedule))


@pytest.fixture(scope="session")
def dbar_full():
    """The 512^2 solve for J={3}, M=9, shared by every test that needs it."""
    import time

    from ordzero.dbar import DbarConfig, assemble_f, build_problem, certificate, solve_min_norm

    t0 = time.perf_counter()
    prob = build_problem(DbarConfig(), J=(3,), M=9.0)
    alpha, info = solve_min_norm(prob)
    sol = assemble_f(prob, alpha, info)
    cert = certificate(sol)
    return sol, cert, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {line}")
