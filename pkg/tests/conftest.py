import numpy as np
import pytest
from hypothesis import settings

from stackelberg_noregret.simulation import Trajectory

settings.register_profile("default", deadline=None)
settings.load_profile("default")


def make_traj(game, leader_actions, follower_actions, seed=0):
    """Trajectory with rewards read off ``game`` for the given action columns."""
    a_l = np.asarray(leader_actions, dtype=np.int64)
    a_f = np.asarray(follower_actions, dtype=np.int64)
    return Trajectory(
        game=game.name,
        normalized=game.normalized,
        scale=game.scale,
        seed=seed,
        leader_actions=a_l,
        follower_actions=a_f,
        leader_rewards=game.leader_payoff[a_l, a_f].astype(np.float64),
        follower_rewards=game.follower_payoff[a_l, a_f].astype(np.float64),
        schedule_active=np.ones(a_l.size, dtype=bool),
    )


@pytest.fixture
def traj_factory():
    return make_traj


def pytest_terminal_summary(terminalreporter):
    # one line per acceptance criterion, recorded by tests/test_acceptance.py
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
