"""Regret, reward-averageness and Stackelberg-gap measurements on trajectories."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import _kernels as K
from .games import MatrixGame
from .learners import commitment_grid
from .simulation import Trajectory
from .solver import StackelbergSolution

__all__ = [
    "RegretReport",
    "SublinearityVerdict",
    "RewardAverageVerdict",
    "GapReport",
    "TrajectoryMismatch",
    "follower_regret",
    "leader_regret",
    "classify_sublinear",
    "reward_average_check",
    "stackelberg_gap",
]

MIN_SERIES = 100


class TrajectoryMismatch(ValueError):
    pass


@dataclass(eq=False)
class RegretReport:
    horizon: int
    achieved: float
    best_dynamic: float
    best_fixed: float
    dynamic_regret: float
    external_regret: float
    regret_series: np.ndarray = field(repr=False)

    def to_dict(self, series: bool = False) -> dict[str, Any]:
        out = {k: v for k, v in asdict(self).items() if k != "regret_series"}
        if series:
            out["regret_series"] = self.regret_series.tolist()
        return out


@dataclass(frozen=True)
class SublinearityVerdict:
    slope: float
    threshold: float
    is_sublinear: bool
    insufficient_data: bool = False

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(eq=False)
class RewardAverageVerdict:
    difference_series: np.ndarray = field(repr=False)
    final_per_round_difference: float
    growth: SublinearityVerdict

    @property
    def is_reward_average(self) -> bool:
        return self.growth.is_sublinear

    def to_dict(self) -> dict[str, Any]:
        return {
            "final_per_round_difference": self.final_per_round_difference,
            "is_reward_average": self.is_reward_average,
            "growth": self.growth.to_dict(),
        }


@dataclass(eq=False)
class GapReport:
    """Distance between realized total utility and ``tau * U_S`` per prefix.

    ``leader_deviation`` and ``follower_deviation`` are ``|T*v - sum R|`` for
    each player against its Stackelberg value; their sum, divided by ``T``,
    bounds ``final_average_gap``.
    """

    U_S: float
    gap_series: np.ndarray = field(repr=False)
    final_average_gap: float
    epsilon: float
    within_bound: bool
    leader_deviation: float
    follower_deviation: float

    @property
    def decomposition_holds(self) -> bool:
        # per-round units, so the 1e-9 slack does not shrink relative to T
        T = self.gap_series.size
        return self.final_average_gap <= (self.leader_deviation + self.follower_deviation) / T + 1e-9

    def to_dict(self, series: bool = False) -> dict[str, Any]:
        out = {k: v for k, v in asdict(self).items() if k != "gap_series"}
        out["decomposition_holds"] = self.decomposition_holds
        if series:
            out["gap_series"] = self.gap_series.tolist()
        return out


def _check_match(traj: Trajectory, game: MatrixGame) -> None:
    if traj.game != game.name:
        raise TrajectoryMismatch(f"trajectory is for {traj.game!r}, game is {game.name!r}")
    if traj.T == 0:
        raise TrajectoryMismatch("empty trajectory")
    a_l, a_f = traj.leader_actions, traj.follower_actions
    if a_l.min() < 0 or a_l.max() >= game.m or a_f.min() < 0 or a_f.max() >= game.n:
        raise TrajectoryMismatch(f"actions out of range for a {game.m}x{game.n} game")
    if not (
        np.allclose(game.leader_payoff[a_l, a_f], traj.leader_rewards, rtol=0, atol=1e-12)
        and np.allclose(game.follower_payoff[a_l, a_f], traj.follower_rewards, rtol=0, atol=1e-12)
    ):
        raise TrajectoryMismatch(
            "recorded rewards do not match the game's payoffs (normalized vs raw game?)"
        )


def follower_regret(traj: Trajectory, game: MatrixGame) -> RegretReport:
    """Follower regret against per-round best responses and the best fixed action.

    Because the follower sees each leader action before moving, the best
    action series decomposes into a per-round best response.
    """
    _check_match(traj, game)
    F = game.follower_payoff
    a_l = traj.leader_actions
    per_round_best = F.max(axis=1)[a_l]
    series = np.cumsum(per_round_best - traj.follower_rewards)
    achieved = math.fsum(traj.follower_rewards.tolist())
    best_dynamic = math.fsum(per_round_best.tolist())
    counts = np.bincount(a_l, minlength=game.m).astype(np.float64)
    best_fixed = float((counts @ F).max())
    return RegretReport(
        horizon=traj.T,
        achieved=achieved,
        best_dynamic=best_dynamic,
        best_fixed=best_fixed,
        dynamic_regret=float(series[-1]),
        external_regret=best_fixed - achieved,
        regret_series=series,
    )


def leader_regret(
    traj: Trajectory, game: MatrixGame, arm_grid: np.ndarray | None = None
) -> RegretReport:
    """Leader regret against commitments evaluated through the follower's
    realized per-context response frequencies.

    Contexts the leader never visited are credited with the follower's strong
    best response. ``best_dynamic`` is the best pure action (the best vertex
    of the simplex); ``best_fixed`` the best commitment in ``arm_grid``.
    """
    _check_match(traj, game)
    grid = commitment_grid(game.m) if arm_grid is None else np.atleast_2d(np.asarray(arm_grid, float))
    if grid.shape[0] == 0:
        raise ValueError("empty commitment grid")
    if grid.shape[1] != game.m:
        raise ValueError("commitment grid does not match the number of leader actions")
    T, m, n = traj.T, game.m, game.n
    L = game.leader_payoff
    br = np.array([K.strong_best_response(game.follower_payoff[i], L[i]) for i in range(m)])

    onehot = np.zeros((T, m * n))
    onehot[np.arange(T), traj.leader_actions * n + traj.follower_actions] = 1.0
    cum = np.cumsum(onehot, axis=0).reshape(T, m, n)
    visits = cum.sum(axis=2)
    # expected leader payoff of each pure action under empirical responses
    with np.errstate(invalid="ignore", divide="ignore"):
        v = (cum * L).sum(axis=2) / visits
    fallback = L[np.arange(m), br]
    v = np.where(visits > 0, v, fallback)

    tau = np.arange(1, T + 1, dtype=np.float64)
    achieved_prefix = np.cumsum(traj.leader_rewards)
    series = tau * v.max(axis=1) - achieved_prefix
    achieved = math.fsum(traj.leader_rewards.tolist())
    v_final = v[-1]
    best_fixed = float(T * (grid @ v_final).max())
    best_dynamic = float(T * v_final.max())
    return RegretReport(
        horizon=T,
        achieved=achieved,
        best_dynamic=best_dynamic,
        best_fixed=best_fixed,
        dynamic_regret=float(series[-1]),
        external_regret=best_fixed - achieved,
        regret_series=series,
    )


def classify_sublinear(series: np.ndarray, threshold: float = 0.9) -> SublinearityVerdict:
    """Fit ``series[tau] ~ c * tau**alpha`` on the second half and compare alpha
    with ``threshold``.

    Only strictly positive entries enter the log-log fit. A series that never
    goes positive counts as sublinear (slope 0).
    """
    y = np.asarray(series, dtype=np.float64)
    if y.size < MIN_SERIES:
        return SublinearityVerdict(float("nan"), threshold, False, insufficient_data=True)
    half = y.size // 2
    x = np.arange(half + 1, y.size + 1, dtype=np.float64)
    tail = y[half:]
    keep = tail > 0
    if keep.sum() < 2:
        return SublinearityVerdict(0.0, threshold, True)
    lx, ly = np.log(x[keep]), np.log(tail[keep])
    lx_c = lx - lx.mean()
    denom = float(lx_c @ lx_c)
    slope = float(lx_c @ (ly - ly.mean()) / denom) if denom > 0 else 0.0
    return SublinearityVerdict(slope, threshold, slope < threshold)


def reward_average_check(
    trajA: Trajectory, trajB: Trajectory, threshold: float = 0.9
) -> RewardAverageVerdict:
    """Compare the follower's cumulative rewards along two trajectories."""
    if trajA.game != trajB.game:
        raise TrajectoryMismatch(f"different games: {trajA.game!r} vs {trajB.game!r}")
    if trajA.T != trajB.T:
        raise TrajectoryMismatch(f"different horizons: {trajA.T} vs {trajB.T}")
    diff = np.abs(np.cumsum(trajA.follower_rewards) - np.cumsum(trajB.follower_rewards))
    return RewardAverageVerdict(diff, float(diff[-1]) / trajA.T, classify_sublinear(diff, threshold))


def stackelberg_gap(traj: Trajectory, solution: StackelbergSolution, epsilon: float = 0.05) -> GapReport:
    """Realized total utility versus ``tau`` rounds of the Stackelberg total value.

    ``solution`` must come from the same normalized game as ``traj``.
    """
    if not traj.normalized:
        raise ValueError("stackelberg_gap needs a trajectory from a normalized game")
    if abs(solution.total_value) > 1.0 + 1e-12:
        raise ValueError("solution values exceed 1 in magnitude; solve the normalized game")
    T = traj.T
    # summing per-round deviations keeps exact equilibrium play exactly at 0
    deviation = traj.leader_rewards + traj.follower_rewards - solution.total_value
    gap = np.abs(np.cumsum(deviation))
    lead = math.fsum(traj.leader_rewards.tolist())
    fol = math.fsum(traj.follower_rewards.tolist())
    final = float(gap[-1]) / T
    return GapReport(
        U_S=solution.total_value,
        gap_series=gap,
        final_average_gap=final,
        epsilon=epsilon,
        within_bound=final <= epsilon,
        leader_deviation=abs(T * solution.leader_value - lead),
        follower_deviation=abs(T * solution.follower_value - fol),
    )
