"""Shared closed-loop runs; each traffic simulation takes a few seconds."""

import pytest

from hjbilateral.sim import run_closed_loop, traffic_config


@pytest.fixture(scope="session")
def fullstate_run():
    return run_closed_loop(traffic_config("fullstate"))


@pytest.fixture(scope="session")
def unilateral_run():
    return run_closed_loop(traffic_config("unilateral", linearization_check=False))


@pytest.fixture(scope="session")
def feedforward_run():
    return run_closed_loop(traffic_config("feedforward", c1=0.0, linearization_check=False))


@pytest.fixture(scope="session")
def observer_run():
    return run_closed_loop(traffic_config("output_feedback", linearization_check=False))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
