"""Stackelberg matrix games played against no-regret follower learners."""

from .audit import (
    GapReport,
    RegretReport,
    SublinearityVerdict,
    classify_sublinear,
    follower_regret,
    leader_regret,
    reward_average_check,
    stackelberg_gap,
)
from .games import MatrixGame, list_builtin, load_builtin, load_game, normalize, payoff
from .harness import ExperimentConfig, RunSummary, render_curves, report_table, run_experiment
from .learners import (
    FollowerLearner,
    LeaderLearner,
    ScheduleMask,
    default_step_size,
    follower_act,
    follower_update,
    leader_act,
    leader_update,
    schedule_active,
)
from .simulation import Trajectory, cumulative_utilities, read_trajectory, run_episode, write_trajectory
from .solver import (
    MixedCommitment,
    StackelbergSolution,
    brute_force_oracle,
    follower_best_response,
    solve_mixed_stackelberg,
    solve_pure_stackelberg,
)

__version__ = "0.1.0"
