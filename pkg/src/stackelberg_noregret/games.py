"""Bimatrix game data, the built-in 2x2 catalogue and reward normalization.

Games are single-state: the leader picks a row, the follower picks a column,
and both collect the corresponding cell of their payoff matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Any, Mapping

import numpy as np

__all__ = [
    "MatrixGame",
    "UnknownGameError",
    "list_builtin",
    "load_builtin",
    "load_game",
    "game_from_dict",
    "normalize",
    "payoff",
]


class UnknownGameError(KeyError):
    pass


def _frozen(values: Any) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MatrixGame:
    """Two-player game given by leader and follower payoff matrices.

    Rows index leader actions, columns index follower actions. ``scale`` is
    the divisor applied by :func:`normalize` (1 for raw games).
    """

    name: str
    leader_payoff: np.ndarray
    follower_payoff: np.ndarray
    scale: float = 1.0
    normalized: bool = False
    m: int = field(init=False)
    n: int = field(init=False)

    def __post_init__(self) -> None:
        lp = _frozen(self.leader_payoff)
        fp = _frozen(self.follower_payoff)
        if lp.ndim != 2 or lp.shape != fp.shape:
            raise ValueError(
                f"payoff matrices must be 2-D with equal shapes, got {lp.shape} and {fp.shape}"
            )
        if lp.shape[0] < 1 or lp.shape[1] < 1:
            raise ValueError("games need at least one action per player")
        if not (np.isfinite(lp).all() and np.isfinite(fp).all()):
            raise ValueError(f"game {self.name!r} has non-finite payoffs")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if self.normalized and np.abs(lp + fp).max() > 1.0 + 1e-12:
            raise ValueError(f"game {self.name!r} is marked normalized but has |U| > 1")
        object.__setattr__(self, "leader_payoff", lp)
        object.__setattr__(self, "follower_payoff", fp)
        object.__setattr__(self, "m", lp.shape[0])
        object.__setattr__(self, "n", lp.shape[1])

    @property
    def total_payoff(self) -> np.ndarray:
        return self.leader_payoff + self.follower_payoff

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "leader_payoff": self.leader_payoff.tolist(),
            "follower_payoff": self.follower_payoff.tolist(),
            "scale": self.scale,
            "normalized": self.normalized,
        }

    def __repr__(self) -> str:
        tag = f", scale={self.scale:g}" if self.normalized else ""
        return f"MatrixGame({self.name!r}, {self.m}x{self.n}{tag})"


# Rows = leader actions, columns = follower actions.
_BUILTIN: dict[str, tuple[list[list[float]], list[list[float]]]] = {
    "prisoners_dilemma": ([[-1, -3], [0, -2]], [[-1, 0], [-3, -2]]),
    "stag_hunt": ([[0, -3], [-1, -2]], [[0, -1], [-3, -2]]),
    "assurance": ([[1, -2], [0, -1]], [[0, -1], [-2, -3]]),
    "coordination": ([[0, -2], [0, -3]], [[0, -3], [-2, -3]]),
    "mixedharmony": ([[0, -1], [-1, -3]], [[0, -3], [-1, -3]]),
    "harmony": ([[0, -1], [-2, -3]], [[0, -2], [-1, -3]]),
    "noconflict": ([[0, -2], [-1, -3]], [[-1, -3], [0, -2]]),
    "deadlock": ([[-2, -3], [-1, 0]], [[-2, 0], [-3, -1]]),
    "prisoners_delight": ([[0, -2], [-1, -3]], [[0, -3], [-2, -1]]),
    "hero": ([[0, -3], [-2, -1]], [[-3, -1], [0, -2]]),
    "battle": ([[-1, -2], [-2, -3]], [[-2, -3], [-1, 0]]),
    "chicken": ([[-1, -2], [0, -3]], [[-1, 0], [-2, -3]]),
}


def list_builtin() -> list[str]:
    return list(_BUILTIN)


def load_builtin(name: str) -> MatrixGame:
    """Return the raw (unnormalized) built-in game called ``name``."""
    try:
        leader, follower = _BUILTIN[name]
    except KeyError:
        raise UnknownGameError(
            f"unknown game {name!r}; valid names: {', '.join(_BUILTIN)}"
        ) from None
    return MatrixGame(name, leader, follower)


def game_from_dict(doc: Mapping[str, Any]) -> MatrixGame:
    missing = {"name", "leader_payoff", "follower_payoff"} - set(doc)
    if missing:
        raise ValueError(f"game document missing keys: {sorted(missing)}")
    return MatrixGame(
        str(doc["name"]),
        doc["leader_payoff"],
        doc["follower_payoff"],
        scale=float(doc.get("scale", 1.0)),
        normalized=bool(doc.get("normalized", False)),
    )


def load_game(spec: str | PathLike[str]) -> MatrixGame:
    """Load a built-in game by name, or a custom game from a JSON file."""
    if isinstance(spec, str) and spec in _BUILTIN:
        return load_builtin(spec)
    try:
        with open(spec) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise UnknownGameError(
            f"{spec!r} is neither a built-in game ({', '.join(_BUILTIN)}) nor a JSON file"
        ) from None
    return game_from_dict(doc)


def normalize(game: MatrixGame) -> MatrixGame:
    """Rescale payoffs so the per-round total utility lies in [-1, 1].

    Both matrices are divided by the largest absolute cell sum
    ``|leader + follower|``. A game whose cell sums are all zero comes back
    unchanged apart from the normalized flag. Dividing by a positive constant
    leaves every argmax intact.
    """
    s = float(np.abs(game.total_payoff).max())
    if s == 0.0 or s == 1.0:
        # Nothing to rescale; keep the matrices bit-identical so normalize is idempotent.
        return MatrixGame(
            game.name, game.leader_payoff, game.follower_payoff,
            scale=game.scale, normalized=True,
        )
    return MatrixGame(
        game.name,
        game.leader_payoff / s,
        game.follower_payoff / s,
        scale=game.scale * s,
        normalized=True,
    )


def payoff(game: MatrixGame, aL: int, aF: int) -> tuple[float, float]:
    if not (0 <= aL < game.m and 0 <= aF < game.n):
        raise IndexError(
            f"action pair ({aL}, {aF}) out of range for a {game.m}x{game.n} game"
        )
    return float(game.leader_payoff[aL, aF]), float(game.follower_payoff[aL, aF])
