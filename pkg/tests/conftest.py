import math

import pytest

from cablesim.actuation import BrakeState, MotorState
from cablesim.config import MOTORS, default_scenario
from cablesim.harness import run_pair


@pytest.fixture(scope="session")
def cfg():
    return default_scenario()


@pytest.fixture(scope="session")
def nominal_pair(cfg):
    """Proposed and time-matched PTP runs of the default scenario, with records."""
    return run_pair(cfg)


@pytest.fixture(scope="session")
def proposed_log(nominal_pair):
    return nominal_pair[0]


@pytest.fixture(scope="session")
def ptp_log(nominal_pair):
    return nominal_pair[1]


def idle_actuators(top_braked=True):
    """Unpowered motors; top brake engaged, side brakes released."""
    motors = {m: MotorState() for m in MOTORS}
    brakes = {m: BrakeState(energized=not (m == "top" and top_braked),
                            engaged=(m == "top" and top_braked)) for m in MOTORS}
    return motors, brakes


def pendulum_start(cfg, length, phi0):
    a = cfg.geometry.anchor_top
    return a.x + length * math.sin(phi0), a.y - length * math.cos(phi0)
