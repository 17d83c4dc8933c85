"""Online learners for the leader and the follower, plus follower update schedules.

Followers are contextual: they keep one independent learner per observed
leader action, since the follower sees the leader's move before choosing.
All randomness comes in through a :class:`numpy.random.Generator`; each
``act`` call consumes a fixed number of uniforms (follower one, leader two)
so the compiled episode loop can pre-draw them in bulk.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Literal, Sequence

import numpy as np

from . import _kernels as K
from .games import MatrixGame
from .solver import MixedCommitment

__all__ = [
    "FOLLOWER_ALGORITHMS",
    "LEADER_ALGORITHMS",
    "NO_REGRET_ALGORITHMS",
    "FollowerLearner",
    "LeaderLearner",
    "ScheduleMask",
    "commitment_grid",
    "default_step_size",
    "follower_act",
    "follower_update",
    "leader_act",
    "leader_update",
    "schedule_active",
]

FOLLOWER_ALGORITHMS = {
    "hedge": K.HEDGE,
    "exp3": K.EXP3,
    "regret_matching": K.REGRET_MATCHING,
    "best_response_oracle": K.BEST_RESPONSE,
    "greedy_q": K.GREEDY_Q,
    "worst_response": K.WORST_RESPONSE,
}
LEADER_ALGORITHMS = {
    "fixed_commitment": K.FIXED,
    "exp3_commitment_grid": K.EXP3_GRID,
    "q_memory": K.Q_MEMORY,
}
# learners whose updates follow the schedule mask
NO_REGRET_ALGORITHMS = frozenset({"hedge", "exp3", "regret_matching"})

SCHEDULE_KINDS = {"always": K.ALWAYS, "every_k": K.EVERY_K, "after_k": K.AFTER_K, "never": K.NEVER}


def default_step_size(n: int, T: int) -> float:
    """Hedge learning rate ``sqrt(8 ln max(n, 2) / T)`` for horizon ``T``."""
    if n < 1 or T < 1:
        raise ValueError("need n >= 1 and T >= 1")
    return K.default_step_size(n, T)


def _rate(value: float | None) -> float:
    # negative sentinel selects the anytime schedule inside the kernels
    return -1.0 if value is None else float(value)


def _payoff_range_ok(game: MatrixGame) -> bool:
    return float(np.abs(game.follower_payoff).max()) <= 1.0 + 1e-12


class FollowerLearner:
    """Follower with one learner instance per observed leader action.

    ``table`` holds per-context state: cumulative losses (hedge, exp3),
    cumulative regrets (regret_matching) or action values (greedy_q).
    ``step_size=None`` uses the anytime rate ``default_step_size(n, t)``
    with ``t`` the number of updates seen in that context.
    """

    def __init__(
        self,
        algorithm: str,
        game: MatrixGame,
        step_size: float | None = None,
        exploration: float | None = None,
        learning_rate: float = 0.1,
    ):
        if algorithm not in FOLLOWER_ALGORITHMS:
            raise ValueError(
                f"unknown follower algorithm {algorithm!r}; choose from {sorted(FOLLOWER_ALGORITHMS)}"
            )
        if algorithm in ("hedge", "exp3") and not _payoff_range_ok(game):
            raise ValueError(f"{algorithm} needs follower payoffs in [-1, 1]; normalize the game first")
        if step_size is not None and step_size < 0:
            raise ValueError("step_size must be >= 0")
        self.algorithm = algorithm
        self.code = FOLLOWER_ALGORITHMS[algorithm]
        self.m, self.n = game.m, game.n
        self.step_size = step_size
        self.exploration = exploration
        self.learning_rate = learning_rate
        self._F = np.ascontiguousarray(game.follower_payoff)
        self._L = np.ascontiguousarray(game.leader_payoff)
        self.table = np.zeros((self.m, self.n))
        self.counts = np.zeros(self.m, dtype=np.int64)

    @property
    def gated(self) -> bool:
        return self.algorithm in NO_REGRET_ALGORITHMS

    def _check_context(self, i: int) -> None:
        if not 0 <= i < self.m:
            raise IndexError(f"leader action {i} out of range for {self.m} leader actions")

    def probs(self, i: int) -> np.ndarray:
        """Current action distribution in context ``i``."""
        self._check_context(i)
        if self.algorithm in ("best_response_oracle", "worst_response", "greedy_q"):
            out = np.zeros(self.n)
            out[K.follower_act(self.code, self.table, self.counts, self._F, self._L, i, 0.0, 0.0, 0.0)] = 1.0
            return out
        return K.follower_probs(
            self.code, self.table, self.counts, i, _rate(self.step_size), _rate(self.exploration)
        )

    def weights(self, i: int) -> np.ndarray:
        """Unnormalized exponential weights of context ``i`` (hedge/exp3)."""
        self._check_context(i)
        eta = K._eta(_rate(self.step_size), self.n, self.counts[i])
        row = self.table[i]
        return np.exp(-eta * (row - row.min()))

    def act(self, i: int, rng: np.random.Generator) -> int:
        self._check_context(i)
        u = rng.random()
        return int(
            K.follower_act(
                self.code, self.table, self.counts, self._F, self._L, i, u,
                _rate(self.step_size), _rate(self.exploration),
            )
        )

    def update(self, i: int, j: int, game: MatrixGame, active: bool = True) -> "FollowerLearner":
        self._check_context(i)
        if not 0 <= j < self.n:
            raise IndexError(f"follower action {j} out of range")
        if self.algorithm in ("hedge", "exp3") and not _payoff_range_ok(game):
            raise ValueError("payoffs outside [-1, 1]; normalize the game first")
        K.follower_update(
            self.code, self.table, self.counts, np.ascontiguousarray(game.follower_payoff), i, j,
            _rate(self.step_size), _rate(self.exploration), self.learning_rate, bool(active),
        )
        return self

    def state(self) -> tuple[np.ndarray, np.ndarray]:
        return self.table.copy(), self.counts.copy()

    def describe(self) -> dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "step_size": self.step_size,
            "exploration": self.exploration,
            "learning_rate": self.learning_rate,
        }


def commitment_grid(m: int, resolution: int = 100) -> np.ndarray:
    """All commitments with probabilities in multiples of ``1/resolution``.

    For ``m = 2`` row ``k`` is ``(k/resolution, 1 - k/resolution)``.
    """
    if m == 1:
        return np.ones((1, 1))
    rows = []
    for head in itertools.product(range(resolution + 1), repeat=m - 1):
        if sum(head) <= resolution:
            rows.append([*head, resolution - sum(head)])
    return np.array(rows, dtype=np.float64) / resolution


class LeaderLearner:
    """Leader strategy: a fixed commitment, exp3 over a commitment grid, or
    epsilon-greedy Q-learning over pure actions.

    The exp3 leader draws a commitment, then a pure action from it. With
    ``estimator="action"`` the reward is importance-weighted by the marginal
    probability of the drawn pure action, which gives an unbiased loss
    estimate for every commitment at once (each commitment's expected loss is
    linear in its action probabilities). ``estimator="arm"`` is textbook exp3:
    only the drawn commitment is charged, weighted by its own probability.

    With ``memory_length > 0`` the exp3 and Q learners keep a separate table
    per window of recent joint actions.
    """

    def __init__(
        self,
        algorithm: str,
        game: MatrixGame,
        commitment: MixedCommitment | Sequence[float] | None = None,
        arms: np.ndarray | Sequence[Sequence[float]] | None = None,
        grid_resolution: int = 100,
        memory_length: int = 0,
        step_size: float | None = None,
        exploration: float | None = None,
        learning_rate: float = 0.1,
        estimator: Literal["action", "arm"] = "action",
    ):
        if algorithm not in LEADER_ALGORITHMS:
            raise ValueError(
                f"unknown leader algorithm {algorithm!r}; choose from {sorted(LEADER_ALGORITHMS)}"
            )
        if memory_length < 0:
            raise ValueError("memory_length must be >= 0")
        if estimator not in ("action", "arm"):
            raise ValueError(f"unknown estimator {estimator!r}")
        self.estimator = estimator
        self.algorithm = algorithm
        self.code = LEADER_ALGORITHMS[algorithm]
        self.m, self.n = game.m, game.n
        self.memory_length = memory_length if algorithm != "fixed_commitment" else 0

        if algorithm == "fixed_commitment":
            if commitment is None:
                raise ValueError("fixed_commitment needs a commitment")
            if not isinstance(commitment, MixedCommitment):
                commitment = MixedCommitment(np.asarray(commitment, dtype=np.float64))
            if len(commitment) != self.m:
                raise ValueError("commitment length does not match the game")
            arm_set = commitment.probs[None, :]
        elif algorithm == "q_memory":
            arm_set = np.eye(self.m)
        else:
            arm_set = commitment_grid(self.m, grid_resolution) if arms is None else np.asarray(arms, float)
        arm_set = np.ascontiguousarray(arm_set, dtype=np.float64)
        if arm_set.ndim != 2 or arm_set.shape[0] == 0:
            raise ValueError("empty arm set")
        if arm_set.shape[1] != self.m:
            raise ValueError("arm commitments must have one entry per leader action")
        for row in arm_set:
            MixedCommitment(row)  # validates
        self.arms = arm_set

        if exploration is None and algorithm == "q_memory":
            exploration = 0.1
        if exploration is None and algorithm == "exp3_commitment_grid":
            exploration = 0.0
        self.step_size = step_size
        self.exploration = exploration
        self.learning_rate = learning_rate
        self.n_contexts = (self.m * self.n + 1) ** self.memory_length
        self.table = np.zeros((self.n_contexts, self.arms.shape[0]))
        self.counts = np.zeros(self.n_contexts, dtype=np.int64)
        self._context = 0
        self._action = 0

    @property
    def n_arms(self) -> int:
        return self.arms.shape[0]

    def context(self, memory: Sequence[tuple[int, int]] = ()) -> int:
        """Context index for the last ``memory_length`` joint actions (oldest first)."""
        L = self.memory_length
        if L == 0:
            return 0
        codes = [self.m * self.n] * L
        recent = list(memory)[-L:]
        for k, (i, j) in enumerate(recent):
            codes[L - len(recent) + k] = i * self.n + j
        return int(K.memory_context(np.array(codes, dtype=np.int64), self.m * self.n + 1))

    def probs(self, memory: Sequence[tuple[int, int]] = ()) -> np.ndarray:
        """Distribution over arms in the context given by ``memory``."""
        c = self.context(memory)
        if self.algorithm == "q_memory":
            eps = float(self.exploration)
            out = np.full(self.m, eps / self.m)
            out[int(np.argmax(self.table[c]))] += 1.0 - eps
            return out
        return K.leader_probs(
            self.code, self.table, self.counts, c, _rate(self.step_size), _rate(self.exploration)
        )

    def act(self, memory: Sequence[tuple[int, int]], rng: np.random.Generator) -> tuple[int, int]:
        c = self.context(memory)
        u1, u2 = rng.random(2)
        arm, action = K.leader_act(
            self.code, self.table, self.counts, self.arms, c, u1, u2,
            _rate(self.step_size), _rate(self.exploration),
        )
        self._context = c
        self._action = int(action)
        return int(arm), int(action)

    def update(self, arm: int, reward: float) -> "LeaderLearner":
        if not -1.0 - 1e-12 <= reward <= 1.0 + 1e-12:
            raise ValueError(f"leader reward {reward} outside [-1, 1]; normalize the game first")
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm {arm} out of range")
        K.leader_update(
            self.code, self.table, self.counts, self.arms, self._context, arm, self._action,
            float(reward), _rate(self.step_size), _rate(self.exploration), self.learning_rate,
            self.estimator == "action",
        )
        return self

    def state(self) -> tuple[np.ndarray, np.ndarray]:
        return self.table.copy(), self.counts.copy()

    def describe(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "algorithm": self.algorithm,
            "memory_length": self.memory_length,
            "step_size": self.step_size,
            "exploration": self.exploration,
            "learning_rate": self.learning_rate,
            "n_arms": self.n_arms,
        }
        if self.algorithm == "exp3_commitment_grid":
            out["estimator"] = self.estimator
        if self.algorithm == "fixed_commitment":
            out["commitment"] = self.arms[0].tolist()
        return out


@dataclass(frozen=True)
class ScheduleMask:
    """When the follower's no-regret learner is allowed to update.

    ``every_k`` learns during epochs 0, k, 2k, ...; ``after_k`` from epoch k on.
    """

    kind: Literal["always", "every_k", "after_k", "never"] = "always"
    k: int = 100
    epoch_length: int = 100

    def __post_init__(self) -> None:
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule {self.kind!r}")
        if self.k < 1 or self.epoch_length < 1:
            raise ValueError("k and epoch_length must be >= 1")

    @property
    def code(self) -> int:
        return SCHEDULE_KINDS[self.kind]


def schedule_active(mask: ScheduleMask, round: int) -> bool:
    epoch = round // mask.epoch_length
    if mask.kind == "always":
        return True
    if mask.kind == "never":
        return False
    if mask.kind == "every_k":
        return epoch % mask.k == 0
    return epoch >= mask.k


def follower_act(learner: FollowerLearner, observed_leader_action: int, rng: np.random.Generator) -> int:
    return learner.act(observed_leader_action, rng)


def follower_update(
    learner: FollowerLearner,
    observed_leader_action: int,
    chosen_action: int,
    game: MatrixGame,
    epoch_active: bool,
) -> FollowerLearner:
    return learner.update(observed_leader_action, chosen_action, game, epoch_active)


def leader_act(
    learner: LeaderLearner, memory: Sequence[tuple[int, int]], rng: np.random.Generator
) -> tuple[int, int]:
    return learner.act(memory, rng)


def leader_update(learner: LeaderLearner, arm: int, reward: float) -> LeaderLearner:
    return learner.update(arm, reward)
