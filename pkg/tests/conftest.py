import dataclasses

import numpy as np
import pytest

from coop_payload import geom
from coop_payload.scenarios import load_scenario
from coop_payload.sim import NoiseConfig, ScenarioConfig, TrajectoryConfig, synthesize_dataset

HOLDS_DEG = [(8, 0, 0), (-8, 0, 0), (0, 8, 0), (0, -8, 0), (5.657, 5.657, 0), (5.657, -5.657, 0)]


def hold_rotations(deg=HOLDS_DEG):
    return tuple(geom.rot_exp(np.radians(h)) for h in deg)


def short_trajectory(vias=20, holds=True, periodic_s=20.0):
    phases = [TrajectoryConfig(kind="random_via", via_count=vias)]
    if holds:
        phases.append(TrajectoryConfig(kind="static_holds", hold_orientations=hold_rotations(), hold_duration=8.0,
                                       transit_time_range=(1.0, 1.5)))
    if periodic_s:
        phases.append(TrajectoryConfig(kind="periodic", duration=periodic_s))
    return tuple(phases)


def short_scenario(name="a", seed=0, noise=NoiseConfig(), **kw) -> ScenarioConfig:
    """A preset payload on a shorter trajectory, for fast tests."""
    sc = load_scenario(name, seed)
    return dataclasses.replace(sc, trajectory=short_trajectory(**kw), noise=noise)


@pytest.fixture(scope="session")
def scenario_a():
    return short_scenario("a")


@pytest.fixture(scope="session")
def gt_a(scenario_a):
    return synthesize_dataset(scenario_a)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
