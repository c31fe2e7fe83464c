import numpy as np
import pytest

from graphpit.meeting_sim import MeetingConfig, simulate_meeting

_acceptance = []


def record_criterion(number, title, passed, detail=""):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}"
    if detail:
        line += f"  ({detail})"
    _acceptance.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_acceptance):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def short_config():
    return MeetingConfig(target_length=30.0, num_speakers_range=(3, 4))


@pytest.fixture(scope="session")
def meeting():
    return simulate_meeting(MeetingConfig(rng_seed=7))


@pytest.fixture(scope="session")
def short_meeting(short_config):
    return simulate_meeting(short_config)
