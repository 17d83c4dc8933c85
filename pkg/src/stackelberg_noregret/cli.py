"""Command line entry point: ``python -m stackelberg_noregret <command>``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import audit, harness
from .games import UnknownGameError, list_builtin, load_game, normalize
from .simulation import read_trajectory
from .solver import solve_mixed_stackelberg, solve_pure_stackelberg


def _print_json(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def cmd_list_games(args: argparse.Namespace) -> int:
    for name in list_builtin():
        print(name)
    return 0


def cmd_solve(args: argparse.Namespace) -> int:
    game = load_game(args.game)
    if args.normalized:
        game = normalize(game)
    sol = solve_mixed_stackelberg(game) if args.mixed else solve_pure_stackelberg(game)
    if args.json:
        _print_json({"game": game.name, "normalized": game.normalized, "scale": game.scale, **sol.to_dict()})
    else:
        probs = ", ".join(f"{p:.4f}" for p in sol.commitment.probs)
        print(f"game              {game.name}{' (normalized)' if game.normalized else ''}")
        print(f"kind              {sol.kind}")
        print(f"commitment        [{probs}]")
        print(f"follower response {sol.follower_response}")
        print(f"leader value      {sol.leader_value:.6g}")
        print(f"follower value    {sol.follower_value:.6g}")
        print(f"total value       {sol.total_value:.6g}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    doc = json.loads(Path(args.config).read_text())
    if args.seed_offset is not None:
        doc["seed_offset"] = args.seed_offset
    if args.output_dir is not None:
        doc["output_dir"] = args.output_dir
    elif doc.get("output_dir") is None:
        doc["output_dir"] = str(harness.default_output_dir())
    config = harness.ExperimentConfig.from_dict(doc)
    summaries = harness.run_experiment(config, workers=args.workers)
    failed = [s for s in summaries if s.error]
    for s in failed:
        print(f"run {s.key} failed: {s.error}", file=sys.stderr)
    print(f"{len(summaries) - len(failed)}/{len(summaries)} runs written to {config.output_dir}")
    return 1 if failed else 0


def cmd_audit(args: argparse.Namespace) -> int:
    traj = read_trajectory(args.trajectory)
    game = load_game(args.game)
    if traj.normalized:
        game = normalize(game)
    solver = solve_mixed_stackelberg if args.solution == "mixed" else solve_pure_stackelberg
    solution = solver(game)
    f_rep = audit.follower_regret(traj, game)
    l_rep = audit.leader_regret(traj, game)
    verdict = audit.classify_sublinear(f_rep.regret_series, args.threshold)
    doc = {
        "game": game.name,
        "T": traj.T,
        "follower_regret": f_rep.to_dict(),
        "follower_sublinearity": verdict.to_dict(),
        "leader_regret": l_rep.to_dict(),
        "solution": solution.to_dict(),
    }
    gap = None
    if traj.normalized:
        gap = audit.stackelberg_gap(traj, solution, args.epsilon)
        doc["gap"] = gap.to_dict()
    if args.series:
        path = Path(args.trajectory).with_suffix(".series.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "follower_dynamic_regret", "leader_regret", "gap"])
            g = gap.gap_series if gap is not None else np.full(traj.T, np.nan)
            for t, row in enumerate(zip(f_rep.regret_series.tolist(), l_rep.regret_series.tolist(), g.tolist())):
                w.writerow([t, *(repr(v) for v in row)])
        doc["series_csv"] = str(path)
    if args.json:
        _print_json(doc)
    else:
        print(f"{game.name}: T = {traj.T}")
        print(f"  follower dynamic regret {f_rep.dynamic_regret:.4f}  external {f_rep.external_regret:.4f}")
        print(f"  slope {verdict.slope:.3f} -> {'sublinear' if verdict.is_sublinear else 'NOT sublinear'}")
        print(f"  leader regret {l_rep.dynamic_regret:.4f}  external {l_rep.external_regret:.4f}")
        if gap is not None:
            print(
                f"  gap vs {solution.kind} Stackelberg total {gap.U_S:.4f}: "
                f"{gap.final_average_gap:.4f} per round ({'within' if gap.within_bound else 'outside'} {gap.epsilon})"
            )
        if args.series:
            print(f"  series written to {doc['series_csv']}")
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    summaries = harness.load_summaries(args.runs)
    out = Path(args.out) if args.out else Path(args.runs) / "plots"
    paths = harness.render_curves(summaries, out, memory=args.memory)
    for p in paths:
        print(p)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    table = harness.report_table(harness.load_summaries(args.runs))
    if args.json:
        _print_json(table.to_json())
    else:
        sys.stdout.write(table.to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stackelberg-noregret",
        description="Stackelberg matrix games with no-regret follower learners.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("list-games", help="print the built-in game names").set_defaults(func=cmd_list_games)

    s = sub.add_parser("solve", help="Stackelberg equilibrium of a game")
    s.add_argument("game", help="built-in name or path to a game JSON file")
    s.add_argument("--mixed", action="store_true", help="optimal mixed commitment (default: pure)")
    s.add_argument("--normalized", action="store_true", help="solve the normalized game")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("run", help="run an experiment grid from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--seed-offset", type=int, default=None, help="added to every seed in the config")
    r.add_argument(
        "--output-dir",
        default=None,
        help=f"overrides the config; default ${harness.OUTPUT_DIR_ENV} or ./runs",
    )
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("audit", help="regret and gap audit of a trajectory CSV")
    a.add_argument("trajectory")
    a.add_argument("--game", required=True)
    a.add_argument(
        "--solution",
        choices=["auto", "pure", "mixed"],
        default="auto",
        help="Stackelberg reference for the gap; auto = pure (the follower sees realized actions)",
    )
    a.add_argument("--epsilon", type=float, default=0.05)
    a.add_argument("--threshold", type=float, default=0.9)
    a.add_argument("--json", action="store_true")
    a.add_argument("--series", action="store_true", help="also write <trajectory>.series.csv")
    a.set_defaults(func=cmd_audit)

    pl = sub.add_parser("plot", help="per-game SVG reward curves")
    pl.add_argument("--runs", required=True)
    pl.add_argument("--out", default=None, help="default <runs>/plots")
    pl.add_argument("--memory", type=int, default=None)
    pl.set_defaults(func=cmd_plot)

    rp = sub.add_parser("report", help="aggregated table over seeds")
    rp.add_argument("--runs", required=True)
    rp.add_argument("--json", action="store_true")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UnknownGameError, audit.TrajectoryMismatch, ValueError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
