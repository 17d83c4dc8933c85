"""Config-driven experiment grid: games x schedules x leader memory x seeds.

Every run plays one episode, audits it, and (optionally) writes

    <output_dir>/runs/<key>.trajectory.csv   (+ .trajectory.json sidecar)
    <output_dir>/runs/<key>.summary.json

followed by a grid-level ``report.json`` / ``report.txt`` merge step.
Outputs contain no timestamps, so re-running a config reproduces them byte
for byte.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import audit
from .games import MatrixGame, list_builtin, load_game, normalize
from .learners import FollowerLearner, LeaderLearner, SCHEDULE_KINDS, ScheduleMask
from .simulation import _atomic_write, best_response_counterfactual, run_episode, write_trajectory
from .solver import solve_mixed_stackelberg, solve_pure_stackelberg

__all__ = [
    "OUTPUT_DIR_ENV",
    "SCHEDULE_COLORS",
    "ExperimentConfig",
    "ReportTable",
    "RunSummary",
    "default_output_dir",
    "execute_run",
    "load_summaries",
    "render_curves",
    "report_table",
    "run_experiment",
]

OUTPUT_DIR_ENV = "STACKELBERG_OUTPUT_DIR"

SCHEDULE_COLORS = {
    "never": "#2ca02c",
    "every_k": "#1f77b4",
    "after_k": "#ff7f0e",
    "always": "#9467bd",
}


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "runs"))


@dataclass
class ExperimentConfig:
    """Experiment grid; JSON config files use these field names.

    ``follower`` drives the no-regret schedules; runs with schedule ``never``
    use ``baseline_follower`` instead. Learner specs are keyword arguments
    of :class:`LeaderLearner` / :class:`FollowerLearner` plus ``algorithm``.
    """

    games: list[str] | str = "all"
    schedules: list[str] = field(default_factory=lambda: ["never", "every_k", "after_k"])
    k: int = 100
    epoch_length: int = 100
    T: int = 100_000
    seeds: list[int] = field(default_factory=lambda: [0])
    leader: dict[str, Any] = field(default_factory=lambda: {"algorithm": "exp3_commitment_grid"})
    follower: dict[str, Any] = field(default_factory=lambda: {"algorithm": "hedge"})
    baseline_follower: dict[str, Any] = field(default_factory=lambda: {"algorithm": "greedy_q"})
    leader_memory: list[int] = field(default_factory=lambda: [0, 1])
    epsilon: float = 0.05
    sublinear_threshold: float = 0.9
    gamma: float = 1.0
    seed_offset: int = 0
    output_dir: str | None = None
    save_trajectories: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        if isinstance(self.games, str):
            if self.games != "all":
                raise ValueError('games must be a list of names/paths or "all"')
        elif not self.games:
            raise ValueError("games must be non-empty")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if not self.schedules:
            raise ValueError("schedules must be non-empty")
        bad = [s for s in self.schedules if s not in SCHEDULE_KINDS]
        if bad:
            raise ValueError(f"unknown schedules {bad}; choose from {sorted(SCHEDULE_KINDS)}")
        if len(set(self.schedules)) != len(self.schedules):
            raise ValueError("duplicate schedules")
        if self.k < 1 or self.epoch_length < 1:
            raise ValueError("k and epoch_length must be >= 1")
        if self.T < self.epoch_length or self.T % self.epoch_length:
            raise ValueError("T must be a positive multiple of epoch_length")
        if not self.leader_memory or any(m < 0 for m in self.leader_memory):
            raise ValueError("leader_memory must be a non-empty list of non-negative lengths")
        if self.gamma != 1.0:
            raise ValueError("only undiscounted play (gamma = 1) is supported")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        for spec in (self.leader, self.follower, self.baseline_follower):
            if "algorithm" not in spec:
                raise ValueError(f"learner spec {spec} lacks an 'algorithm'")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"unknown config fields {unknown}")
        return cls(**dict(doc))

    @classmethod
    def from_json(cls, path: str | os.PathLike[str]) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def game_names(self) -> list[str]:
        return list_builtin() if self.games == "all" else list(self.games)

    def run_keys(self) -> list[tuple[str, str, int, int]]:
        """Cartesian grid in a fixed order; seeds already include the offset."""
        return [
            (g, s, mem, seed + self.seed_offset)
            for g in self.game_names()
            for s in self.schedules
            for mem in self.leader_memory
            for seed in self.seeds
        ]


def run_key(game: str, schedule: str, memory: int, seed: int) -> str:
    return f"{Path(game).stem}__{schedule}__mem{memory}__seed{seed}"


@dataclass(eq=False)
class RunSummary:
    """Audited outcome of one run. Epoch means are in normalized units; the
    ``*_raw`` properties rescale them to the game's printed payoffs."""

    game: str
    schedule: str
    memory: int
    seed: int
    T: int
    epoch_length: int
    scale: float
    leader_epoch_means: np.ndarray
    follower_epoch_means: np.ndarray
    follower_regret: dict[str, Any]
    follower_sublinearity: dict[str, Any]
    leader_regret: dict[str, Any]
    gap: dict[str, Any]
    reward_average: dict[str, Any]
    solutions: dict[str, dict[str, Any]]
    leader: dict[str, Any] = field(default_factory=dict)
    follower: dict[str, Any] = field(default_factory=dict)
    error: str | None = None

    @property
    def key(self) -> str:
        return run_key(self.game, self.schedule, self.memory, self.seed)

    @property
    def leader_epoch_means_raw(self) -> np.ndarray:
        return self.leader_epoch_means * self.scale

    @property
    def follower_epoch_means_raw(self) -> np.ndarray:
        return self.follower_epoch_means * self.scale

    def to_dict(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["leader_epoch_means"] = self.leader_epoch_means.tolist()
        out["follower_epoch_means"] = self.follower_epoch_means.tolist()
        return out

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "RunSummary":
        d = dict(doc)
        d["leader_epoch_means"] = np.asarray(d["leader_epoch_means"], dtype=np.float64)
        d["follower_epoch_means"] = np.asarray(d["follower_epoch_means"], dtype=np.float64)
        return cls(**d)


def _epoch_means(rewards: np.ndarray, epoch_length: int) -> np.ndarray:
    return rewards.reshape(-1, epoch_length).mean(axis=1)


def _games(config: ExperimentConfig) -> dict[str, tuple[MatrixGame, MatrixGame]]:
    out = {}
    for name in config.game_names():
        raw = load_game(name)
        out[name] = (raw, normalize(raw))
    return out


def _build(config: ExperimentConfig, game: MatrixGame, schedule: str, memory: int):
    leader_spec = dict(config.leader)
    algo = leader_spec.pop("algorithm")
    leader_spec.pop("memory_length", None)
    leader = LeaderLearner(algo, game, memory_length=memory, **leader_spec)
    fspec = dict(config.baseline_follower if schedule == "never" else config.follower)
    follower = FollowerLearner(fspec.pop("algorithm"), game, **fspec)
    return leader, follower, ScheduleMask(schedule, config.k, config.epoch_length)


def validate(config: ExperimentConfig) -> dict[str, tuple[MatrixGame, MatrixGame]]:
    """Load every game and build every learner once, so a bad spec fails
    before any run starts."""
    games = _games(config)
    for name, (_, game) in games.items():
        for schedule in config.schedules:
            for memory in config.leader_memory:
                try:
                    _build(config, game, schedule, memory)
                except TypeError as exc:
                    raise ValueError(f"invalid learner spec: {exc}") from None
    return games


def execute_run(
    config: ExperimentConfig,
    key: tuple[str, str, int, int],
    games: Mapping[str, tuple[MatrixGame, MatrixGame]] | None = None,
) -> RunSummary:
    """Play and audit one grid cell; writes its files when ``output_dir`` is set."""
    name, schedule, memory, seed = key
    if games is not None:
        raw, game = games[name]
    else:
        raw = load_game(name)
        game = normalize(raw)
    leader, follower, mask = _build(config, game, schedule, memory)
    traj = run_episode(game, leader, follower, mask, config.T, seed)

    f_rep = audit.follower_regret(traj, game)
    pure, mixed = solve_pure_stackelberg(game), solve_mixed_stackelberg(game)
    pure_raw, mixed_raw = solve_pure_stackelberg(raw), solve_mixed_stackelberg(raw)
    gap = audit.stackelberg_gap(traj, pure, config.epsilon)
    ra = audit.reward_average_check(
        traj, best_response_counterfactual(traj, game), config.sublinear_threshold
    )
    summary = RunSummary(
        game=game.name,
        schedule=schedule,
        memory=memory,
        seed=seed,
        T=config.T,
        epoch_length=config.epoch_length,
        scale=game.scale,
        leader_epoch_means=_epoch_means(traj.leader_rewards, config.epoch_length),
        follower_epoch_means=_epoch_means(traj.follower_rewards, config.epoch_length),
        follower_regret=f_rep.to_dict(),
        follower_sublinearity=audit.classify_sublinear(
            f_rep.regret_series, config.sublinear_threshold
        ).to_dict(),
        leader_regret=audit.leader_regret(traj, game).to_dict(),
        gap=gap.to_dict(),
        reward_average=ra.to_dict(),
        solutions={
            "pure": {"normalized": pure.to_dict(), "raw": pure_raw.to_dict()},
            "mixed": {"normalized": mixed.to_dict(), "raw": mixed_raw.to_dict()},
        },
        leader=traj.leader,
        follower=traj.follower,
    )
    if config.output_dir is not None:
        run_dir = Path(config.output_dir) / "runs"
        try:
            run_dir.mkdir(parents=True, exist_ok=True)
            if config.save_trajectories:
                write_trajectory(traj, run_dir / f"{summary.key}.trajectory.csv")
            _atomic_write(run_dir / f"{summary.key}.summary.json", _dumps(summary.to_dict()))
        except OSError as exc:
            summary.error = f"{type(exc).__name__}: {exc}"
    return summary


def _dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _execute_packed(args: tuple[ExperimentConfig, tuple[str, str, int, int]]) -> RunSummary:
    config, key = args
    return execute_run(config, key)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> list[RunSummary]:
    """Run the full grid; results come back in grid order whatever the worker count."""
    games = validate(config)
    keys = config.run_keys()
    workers = config.workers if workers is None else workers
    if workers > 1 and len(keys) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_execute_packed, [(config, k) for k in keys], chunksize=1))
    else:
        summaries = [execute_run(config, k, games) for k in keys]

    if config.output_dir is not None:
        out = Path(config.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            _atomic_write(out / "config.json", _dumps(config_for_record(config)))
            table = report_table(summaries)
            _atomic_write(out / "report.json", _dumps(table.to_json()))
            _atomic_write(out / "report.txt", table.to_text())
        except OSError as exc:
            warnings.warn(f"could not write grid report: {exc}")
    return summaries


def config_for_record(config: ExperimentConfig) -> dict[str, Any]:
    # worker count and location do not affect results; keep them out of outputs
    doc = config.to_dict()
    doc.pop("workers")
    doc.pop("output_dir")
    return doc


def load_summaries(runs_dir: str | os.PathLike[str]) -> list[RunSummary]:
    root = Path(runs_dir)
    if (root / "runs").is_dir():
        root = root / "runs"
    paths = sorted(root.glob("*.summary.json"))
    return [RunSummary.from_dict(json.loads(p.read_text())) for p in paths]


# ------------------------------------------------------------------ plotting

_W, _H = 640, 400
_PAD_L, _PAD_R, _PAD_T, _PAD_B = 70, 130, 40, 50


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _svg_curves(
    title: str,
    series: Mapping[str, np.ndarray],
    reference: float,
    epoch_length: int,
) -> str:
    lo = min(min(float(s.min()) for s in series.values()), reference)
    hi = max(max(float(s.max()) for s in series.values()), reference)
    if hi - lo < 1e-9:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    n_epochs = max(len(s) for s in series.values())
    pw, ph = _W - _PAD_L - _PAD_R, _H - _PAD_T - _PAD_B

    def x(e: float) -> float:
        return _PAD_L + (e / max(n_epochs - 1, 1)) * pw

    def y(v: float) -> float:
        return _PAD_T + (hi - v) / (hi - lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{_PAD_L}" y="{_PAD_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for v in np.linspace(lo, hi, 5):
        parts.append(
            f'<text x="{_PAD_L - 6}" y="{y(v) + 4:.1f}" text-anchor="end" font-size="10">{v:.2f}</text>'
        )
    for e in np.linspace(0, n_epochs - 1, 5):
        parts.append(
            f'<text x="{x(e):.1f}" y="{_PAD_T + ph + 16}" text-anchor="middle" font-size="10">{int(round(e))}</text>'
        )
    parts.append(
        f'<text x="{_PAD_L + pw / 2:.1f}" y="{_H - 10}" text-anchor="middle" font-size="12">'
        f"epoch ({epoch_length} rounds)</text>"
    )
    parts.append(
        f'<text x="16" y="{_PAD_T + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_PAD_T + ph / 2:.1f})">mean leader reward (raw payoff units)</text>'
    )
    parts.append(
        f'<line class="reference" x1="{_PAD_L}" y1="{y(reference):.2f}" x2="{_PAD_L + pw}" '
        f'y2="{y(reference):.2f}" stroke="#000" stroke-dasharray="6 4" data-value="{reference!r}"/>'
    )
    legend_y = _PAD_T + 10
    for schedule, s in series.items():
        color = SCHEDULE_COLORS[schedule]
        pts = " ".join(f"{x(e):.2f},{y(v):.2f}" for e, v in enumerate(s.tolist()))
        parts.append(
            f'<polyline class="schedule" data-schedule="{schedule}" fill="none" '
            f'stroke="{color}" stroke-width="1.5" points="{pts}"/>'
        )
        lx = _PAD_L + pw + 10
        parts.append(f'<line x1="{lx}" y1="{legend_y}" x2="{lx + 20}" y2="{legend_y}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 25}" y="{legend_y + 4}" font-size="11">{schedule}</text>')
        legend_y += 18
    parts.append(f'<line x1="{_PAD_L + pw + 10}" y1="{legend_y}" x2="{_PAD_L + pw + 30}" y2="{legend_y}" stroke="#000" stroke-dasharray="4 3"/>')
    parts.append(f'<text x="{_PAD_L + pw + 35}" y="{legend_y + 4}" font-size="11">Stackelberg</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_curves(
    summaries: Sequence[RunSummary],
    output_dir: str | os.PathLike[str],
    memory: int | None = None,
) -> list[Path]:
    """One SVG per game of seed-averaged per-epoch leader reward, one
    polyline per schedule, plus a dashed line at the mixed Stackelberg
    leader value. With several memory lengths in ``summaries`` and
    ``memory=None`` each length gets its own file ``<game>_mem<k>.svg``.
    """
    summaries = [s for s in summaries if s.error is None]
    if memory is not None:
        summaries = [s for s in summaries if s.memory == memory]
    if not summaries:
        warnings.warn("no run summaries to plot; nothing written")
        return []
    memories = sorted({s.memory for s in summaries})
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for game in sorted({s.game for s in summaries}):
        for mem in memories:
            group = [s for s in summaries if s.game == game and s.memory == mem]
            if not group:
                continue
            if len({(s.T, s.epoch_length) for s in group}) > 1:
                raise ValueError(f"runs for {game!r} have different horizons or epoch lengths")
            series = {}
            for schedule in SCHEDULE_COLORS:
                runs = [s for s in group if s.schedule == schedule]
                if runs:
                    series[schedule] = np.mean([r.leader_epoch_means_raw for r in runs], axis=0)
            reference = float(group[0].solutions["mixed"]["raw"]["leader_value"])
            name = f"{game}.svg" if len(memories) == 1 else f"{game}_mem{mem}.svg"
            title = game if len(memories) == 1 else f"{game} (leader memory {mem})"
            path = out_dir / name
            _atomic_write(path, _svg_curves(title, series, reference, group[0].epoch_length))
            written.append(path)
    return written


# ------------------------------------------------------------------- report


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0


@dataclass
class ReportTable:
    rows: list[dict[str, Any]]

    def to_json(self) -> list[dict[str, Any]]:
        return self.rows

    def to_text(self) -> str:
        head = (
            f"{'game':<18} {'schedule':<8} {'mem':>3} {'n':>3} "
            f"{'final leader (raw)':>20} {'regret slope':>15} {'reward-avg':>10} {'gap':>5}"
        )
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r['game']:<18} {r['schedule']:<8} {r['memory']:>3} {r['n_runs']:>3} "
                f"{_fmt(r['final_leader_reward_mean']):>10} ± {_fmt(r['final_leader_reward_std']):<7} "
                f"{_fmt(r['regret_slope_mean']):>6} ± {_fmt(r['regret_slope_std']):<6} "
                f"{r['reward_average_passed']:>4}/{r['n_runs']:<5} "
                f"{'yes' if r['gap_within_bound'] else 'no':>5}"
            )
        return "\n".join(lines) + "\n"


def report_table(summaries: Iterable[RunSummary]) -> ReportTable:
    """Aggregate runs by (game, schedule, memory): means with sample standard
    deviations (n - 1 denominator), reward-average pass counts, and the gap
    flag AND-ed over seeds. Failed runs are counted separately."""
    groups: dict[tuple[str, str, int], list[RunSummary]] = {}
    for s in summaries:
        groups.setdefault((s.game, s.schedule, s.memory), []).append(s)
    rows = []
    for (game, schedule, mem), runs in sorted(groups.items()):
        ok = [r for r in runs if r.error is None]
        row: dict[str, Any] = {
            "game": game,
            "schedule": schedule,
            "memory": mem,
            "n_runs": len(ok),
            "n_failed": len(runs) - len(ok),
            "seeds": sorted(r.seed for r in ok),
        }
        if ok:
            final = [float(r.leader_epoch_means_raw[-1]) for r in ok]
            final_f = [float(r.follower_epoch_means_raw[-1]) for r in ok]
            slopes = [r.follower_sublinearity["slope"] for r in ok]
            gaps = [r.gap["final_average_gap"] for r in ok]
            row["final_leader_reward_mean"], row["final_leader_reward_std"] = _mean_std(final)
            row["final_follower_reward_mean"], row["final_follower_reward_std"] = _mean_std(final_f)
            row["regret_slope_mean"], row["regret_slope_std"] = _mean_std(slopes)
            row["final_average_gap_mean"], row["final_average_gap_std"] = _mean_std(gaps)
            row["reward_average_passed"] = sum(bool(r.reward_average["is_reward_average"]) for r in ok)
            row["gap_within_bound"] = all(bool(r.gap["within_bound"]) for r in ok)
        else:
            for k in ("final_leader_reward", "final_follower_reward", "regret_slope", "final_average_gap"):
                row[f"{k}_mean"] = row[f"{k}_std"] = math.nan
            row["reward_average_passed"] = 0
            row["gap_within_bound"] = False
        rows.append(row)
    return ReportTable(rows)
