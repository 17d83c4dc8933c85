"""Iterated leader/follower play.

Each round the leader moves first, the follower observes that move and
responds, both collect rewards from the (normalized) game and update.
"""

from __future__ import annotations

import csv
import json
import math
import os
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, NamedTuple

import numpy as np

from . import _kernels as K
from .games import MatrixGame
from .learners import (
    FollowerLearner,
    LeaderLearner,
    ScheduleMask,
    _rate,
    follower_act,
    follower_update,
    leader_act,
    leader_update,
    schedule_active,
)

__all__ = [
    "CSV_HEADER",
    "RoundRecord",
    "Trajectory",
    "agent_streams",
    "best_response_counterfactual",
    "cumulative_utilities",
    "read_trajectory",
    "run_episode",
    "write_trajectory",
]

CSV_HEADER = ("t", "leader_action", "follower_action", "leader_reward", "follower_reward", "schedule_active")


class RoundRecord(NamedTuple):
    t: int
    leader_action: int
    follower_action: int
    leader_reward: float
    follower_reward: float
    schedule_active: bool


@dataclass(eq=False)
class Trajectory:
    """Column-stored record of one episode; rewards are in normalized units."""

    game: str
    normalized: bool
    scale: float
    seed: int | None
    leader_actions: np.ndarray
    follower_actions: np.ndarray
    leader_rewards: np.ndarray
    follower_rewards: np.ndarray
    schedule_active: np.ndarray
    follower_seed: int | None = None
    leader: dict[str, Any] = field(default_factory=dict)
    follower: dict[str, Any] = field(default_factory=dict)
    mask: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        T = len(self.leader_actions)
        cols = (self.follower_actions, self.leader_rewards, self.follower_rewards, self.schedule_active)
        if any(len(c) != T for c in cols):
            raise ValueError("trajectory columns have different lengths")

    @property
    def T(self) -> int:
        return len(self.leader_actions)

    def __len__(self) -> int:
        return self.T

    def records(self) -> Iterator[RoundRecord]:
        for t in range(self.T):
            yield RoundRecord(
                t,
                int(self.leader_actions[t]),
                int(self.follower_actions[t]),
                float(self.leader_rewards[t]),
                float(self.follower_rewards[t]),
                bool(self.schedule_active[t]),
            )

    def metadata(self) -> dict[str, Any]:
        return {
            "game": self.game,
            "normalized": self.normalized,
            "scale": self.scale,
            "seed": self.seed,
            "follower_seed": self.follower_seed,
            "T": self.T,
            "leader": self.leader,
            "follower": self.follower,
            "mask": self.mask,
        }

    def same_columns(self, other: "Trajectory") -> bool:
        return all(
            np.array_equal(a, b)
            for a, b in [
                (self.leader_actions, other.leader_actions),
                (self.follower_actions, other.follower_actions),
                (self.leader_rewards, other.leader_rewards),
                (self.follower_rewards, other.follower_rewards),
                (self.schedule_active, other.schedule_active),
            ]
        )


def agent_streams(seed: int, follower_seed: int | None = None) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent leader and follower generators derived from ``seed``.

    ``follower_seed`` replaces only the follower stream, so paired runs can
    share the leader's randomness.
    """
    leader_ss, follower_ss = np.random.SeedSequence(seed).spawn(2)
    if follower_seed is not None:
        follower_ss = np.random.SeedSequence(follower_seed).spawn(2)[1]
    return np.random.default_rng(leader_ss), np.random.default_rng(follower_ss)


def run_episode(
    game: MatrixGame,
    leader: LeaderLearner,
    follower: FollowerLearner,
    mask: ScheduleMask,
    T: int,
    seed: int,
    *,
    follower_seed: int | None = None,
    engine: str = "compiled",
) -> Trajectory:
    """Play ``T`` rounds; learners are updated in place.

    ``engine="python"`` steps through the public learner API round by round;
    ``"compiled"`` runs the same arithmetic in one compiled loop. Both give
    identical trajectories for the same inputs.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if (leader.m, leader.n) != (game.m, game.n) or (follower.m, follower.n) != (game.m, game.n):
        raise ValueError("learners were built for a different game shape")
    if np.abs(game.total_payoff).max() > 1.0 + 1e-12:
        raise ValueError(f"game {game.name!r} must be normalized before simulation")
    rng_l, rng_f = agent_streams(seed, follower_seed)

    if engine == "compiled":
        u_leader = rng_l.random((T, 2))
        u_follower = rng_f.random(T)
        cols = K.run_episode(
            np.ascontiguousarray(game.leader_payoff), np.ascontiguousarray(game.follower_payoff), T,
            leader.code, leader.table, leader.counts, leader.arms,
            _rate(leader.step_size), _rate(leader.exploration), leader.learning_rate,
            leader.estimator == "action", leader.memory_length,
            follower.code, follower.table, follower.counts,
            _rate(follower.step_size), _rate(follower.exploration), follower.learning_rate,
            mask.code, mask.k, mask.epoch_length,
            u_leader, u_follower,
        )
        a_l, a_f, r_l, r_f, active = cols
    elif engine == "python":
        a_l = np.empty(T, np.int64)
        a_f = np.empty(T, np.int64)
        r_l = np.empty(T)
        r_f = np.empty(T)
        active = np.empty(T, bool)
        memory: deque[tuple[int, int]] = deque(maxlen=max(leader.memory_length, 1))
        for t in range(T):
            arm, i = leader_act(leader, memory, rng_l)
            j = follower_act(follower, i, rng_f)
            rl, rf = game.leader_payoff[i, j], game.follower_payoff[i, j]
            on = schedule_active(mask, t)
            leader_update(leader, arm, rl)
            follower_update(follower, i, j, game, on)
            memory.append((i, j))
            a_l[t], a_f[t], r_l[t], r_f[t], active[t] = i, j, rl, rf, on
    else:
        raise ValueError(f"unknown engine {engine!r}")

    return Trajectory(
        game=game.name,
        normalized=game.normalized,
        scale=game.scale,
        seed=seed,
        follower_seed=follower_seed,
        leader_actions=a_l,
        follower_actions=a_f,
        leader_rewards=r_l,
        follower_rewards=r_f,
        schedule_active=active,
        leader=leader.describe(),
        follower=follower.describe(),
        mask={"kind": mask.kind, "k": mask.k, "epoch_length": mask.epoch_length},
    )


def cumulative_utilities(traj: Trajectory, raw: bool = False) -> tuple[float, float, float]:
    """Exact sums of leader, follower and joint rewards."""
    if traj.T == 0:
        raise ValueError("empty trajectory")
    f = traj.scale if raw else 1.0
    lead = math.fsum(traj.leader_rewards.tolist()) * f
    fol = math.fsum(traj.follower_rewards.tolist()) * f
    return lead, fol, lead + fol


def best_response_counterfactual(traj: Trajectory, game: MatrixGame) -> Trajectory:
    """The same leader actions answered by the strong best response every round."""
    br = np.array(
        [K.strong_best_response(game.follower_payoff[i], game.leader_payoff[i]) for i in range(game.m)]
    )
    a_f = br[traj.leader_actions]
    return Trajectory(
        game=traj.game,
        normalized=traj.normalized,
        scale=traj.scale,
        seed=traj.seed,
        follower_seed=traj.follower_seed,
        leader_actions=traj.leader_actions.copy(),
        follower_actions=a_f,
        leader_rewards=game.leader_payoff[traj.leader_actions, a_f],
        follower_rewards=game.follower_payoff[traj.leader_actions, a_f],
        schedule_active=traj.schedule_active.copy(),
        leader=traj.leader,
        follower={"algorithm": "best_response_oracle"},
        mask=traj.mask,
    )


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_trajectory(traj: Trajectory, path: str | os.PathLike[str]) -> tuple[Path, Path]:
    """Write ``path`` (CSV rows) and a JSON sidecar with the same stem."""
    path = Path(path)
    lines = [",".join(CSV_HEADER)]
    lines.extend(
        f"{t},{i},{j},{x!r},{y!r},{int(s)}"
        for t, (i, j, x, y, s) in enumerate(
            zip(
                traj.leader_actions.tolist(),
                traj.follower_actions.tolist(),
                traj.leader_rewards.tolist(),
                traj.follower_rewards.tolist(),
                traj.schedule_active.tolist(),
            )
        )
    )
    _atomic_write(path, "\n".join(lines) + "\n")
    sidecar = path.with_suffix(".json")
    _atomic_write(sidecar, json.dumps(traj.metadata(), indent=2, sort_keys=True) + "\n")
    return path, sidecar


def read_trajectory(path: str | os.PathLike[str]) -> Trajectory:
    path = Path(path)
    sidecar = path.with_suffix(".json")
    meta: dict[str, Any] = {}
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected trajectory header {header}")
        rows = list(reader)
    if [int(r[0]) for r in rows] != list(range(len(rows))):
        raise ValueError("trajectory rounds must run 0..T-1 in order")
    return Trajectory(
        game=meta.get("game", path.stem),
        normalized=bool(meta.get("normalized", True)),
        scale=float(meta.get("scale", 1.0)),
        seed=meta.get("seed"),
        follower_seed=meta.get("follower_seed"),
        leader_actions=np.array([int(r[1]) for r in rows], dtype=np.int64),
        follower_actions=np.array([int(r[2]) for r in rows], dtype=np.int64),
        leader_rewards=np.array([float(r[3]) for r in rows]),
        follower_rewards=np.array([float(r[4]) for r in rows]),
        schedule_active=np.array([r[5] in ("1", "True", "true") for r in rows], dtype=bool),
        leader=meta.get("leader", {}),
        follower=meta.get("follower", {}),
        mask=meta.get("mask", {}),
    )
