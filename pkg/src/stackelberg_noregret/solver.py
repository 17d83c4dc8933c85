"""Follower best responses and strong Stackelberg equilibria of bimatrix games."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .games import MatrixGame

__all__ = [
    "TOL",
    "MixedCommitment",
    "StackelbergSolution",
    "follower_best_response",
    "solve_pure_stackelberg",
    "solve_mixed_stackelberg",
    "brute_force_oracle",
]

TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MixedCommitment:
    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("commitment must be a non-empty probability vector")
        if (p < 0).any() or abs(p.sum() - 1.0) > TOL:
            raise ValueError(f"invalid commitment {p.tolist()}: entries must be >= 0 and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def pure(cls, action: int, m: int) -> "MixedCommitment":
        p = np.zeros(m)
        p[action] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, m: int) -> "MixedCommitment":
        return cls(np.full(m, 1.0 / m))

    def __len__(self) -> int:
        return self.probs.size

    def __repr__(self) -> str:
        return f"MixedCommitment({self.probs.tolist()})"


@dataclass(frozen=True)
class StackelbergSolution:
    commitment: MixedCommitment
    follower_response: int
    leader_value: float
    follower_value: float
    total_value: float
    kind: Literal["pure", "mixed"]

    def scaled(self, factor: float) -> "StackelbergSolution":
        """Same solution with values multiplied by ``factor`` (e.g. back to raw units)."""
        return StackelbergSolution(
            self.commitment,
            self.follower_response,
            self.leader_value * factor,
            self.follower_value * factor,
            self.total_value * factor,
            self.kind,
        )

    def to_dict(self) -> dict:
        return {
            "commitment": self.commitment.probs.tolist(),
            "follower_response": self.follower_response,
            "leader_value": self.leader_value,
            "follower_value": self.follower_value,
            "total_value": self.total_value,
            "kind": self.kind,
        }


def _as_commitment(game: MatrixGame, commitment: MixedCommitment | Sequence[float]) -> MixedCommitment:
    if not isinstance(commitment, MixedCommitment):
        commitment = MixedCommitment(np.asarray(commitment, dtype=np.float64))
    if len(commitment) != game.m:
        raise ValueError(f"commitment has length {len(commitment)}, game has {game.m} leader actions")
    return commitment


def _strong_response(follower_vals: np.ndarray, leader_vals: np.ndarray) -> int:
    # Follower-optimal set, then leader-optimal inside it, then lowest index.
    best = np.flatnonzero(follower_vals >= follower_vals.max() - TOL)
    lv = leader_vals[best]
    return int(best[np.flatnonzero(lv >= lv.max() - TOL)[0]])


def follower_best_response(game: MatrixGame, commitment: MixedCommitment | Sequence[float]) -> int:
    """Follower action maximizing its expected payoff against ``commitment``.

    Ties within 1e-9 go to the leader's preferred action (strong Stackelberg
    convention), then to the lowest index.
    """
    x = _as_commitment(game, commitment).probs
    return _strong_response(x @ game.follower_payoff, x @ game.leader_payoff)


def _solution(game: MatrixGame, x: np.ndarray, kind: str) -> StackelbergSolution:
    c = MixedCommitment(x)
    j = follower_best_response(game, c)
    lv = float(c.probs @ game.leader_payoff[:, j])
    fv = float(c.probs @ game.follower_payoff[:, j])
    return StackelbergSolution(c, j, lv, fv, lv + fv, kind)  # type: ignore[arg-type]


def solve_pure_stackelberg(game: MatrixGame) -> StackelbergSolution:
    best_i, best_v = 0, -np.inf
    for i in range(game.m):
        j = _strong_response(game.follower_payoff[i], game.leader_payoff[i])
        v = game.leader_payoff[i, j]
        if v > best_v + TOL:
            best_i, best_v = i, v
    x = np.zeros(game.m)
    x[best_i] = 1.0
    return _solution(game, x, "pure")


def _candidates_2xn(game: MatrixGame) -> list[float]:
    """Endpoints of every follower action's best-response interval.

    With ``p`` the probability of row 0, follower action j is a best response
    on an interval of [0, 1]; the leader's payoff against j is linear in p, so
    the optimum sits at one of these endpoints.
    """
    F = game.follower_payoff
    slope = F[0] - F[1]
    out: list[float] = []
    for j in range(game.n):
        lo, hi = 0.0, 1.0
        for k in range(game.n):
            if k == j:
                continue
            # value_j(p) - value_k(p) = a*p + b >= 0
            a = slope[j] - slope[k]
            b = F[1, j] - F[1, k]
            if abs(a) <= TOL:
                if b < -TOL:
                    lo, hi = 1.0, 0.0
                    break
                continue
            root = -b / a
            if a > 0:
                lo = max(lo, root)
            else:
                hi = min(hi, root)
        if lo <= hi + TOL:
            out.extend([min(max(hi, 0.0), 1.0), min(max(lo, 0.0), 1.0)])
    return out


def _mixed_lp(game: MatrixGame) -> np.ndarray:
    from scipy.optimize import linprog

    L, F = game.leader_payoff, game.follower_payoff
    best_x, best_v = None, -np.inf
    for j in range(game.n):
        others = [k for k in range(game.n) if k != j]
        A_ub = np.stack([F[:, k] - F[:, j] for k in others]) if others else None
        b_ub = np.zeros(len(others)) if others else None
        res = linprog(
            -L[:, j],
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=np.ones((1, game.m)),
            b_eq=[1.0],
            bounds=[(0, None)] * game.m,
            method="highs",
        )
        if res.status == 0 and -res.fun > best_v + TOL:
            best_v, best_x = -res.fun, np.clip(res.x, 0.0, None)
    assert best_x is not None
    return best_x / best_x.sum()


def solve_mixed_stackelberg(game: MatrixGame) -> StackelbergSolution:
    """Optimal mixed commitment against a best-responding follower.

    Exact for two leader actions (interval-endpoint enumeration, preferring
    commitments with more weight on row 0 among equal values); larger games go
    through one linear program per follower action.
    """
    if game.m == 1:
        return _solution(game, np.ones(1), "mixed")
    if game.m > 2:
        sol = _solution(game, _mixed_lp(game), "mixed")
        pure = solve_pure_stackelberg(game)
        if pure.leader_value > sol.leader_value + TOL:
            return StackelbergSolution(**{**pure.__dict__, "kind": "mixed"})
        return sol
    best: StackelbergSolution | None = None
    for p in sorted(set(_candidates_2xn(game)), reverse=True):
        cand = _solution(game, np.array([p, 1.0 - p]), "mixed")
        if best is None or cand.leader_value > best.leader_value + TOL:
            best = cand
    assert best is not None
    return best


def brute_force_oracle(game: MatrixGame, resolution: int) -> StackelbergSolution:
    """Grid search over commitments ``(k/resolution, 1 - k/resolution)``.

    Independent of the endpoint solver; meant for checking it.
    """
    if game.m != 2:
        raise ValueError(f"grid oracle supports 2 leader actions, got {game.m}")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    p = np.arange(resolution, -1, -1) / resolution
    X = np.stack([p, 1.0 - p], axis=1)
    fv = X @ game.follower_payoff
    lv = X @ game.leader_payoff
    tied = fv >= fv.max(axis=1, keepdims=True) - TOL
    # strong tie-break: among follower-optimal columns take the leader's best
    masked = np.where(tied, lv, -np.inf)
    value = masked.max(axis=1)
    k = int(np.argmax(value))
    return _solution(game, X[k].copy(), "mixed")
