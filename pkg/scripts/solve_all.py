"""Print pure and mixed Stackelberg solutions of every built-in game, raw and normalized."""

from stackelberg_noregret.games import list_builtin, load_builtin, normalize
from stackelberg_noregret.solver import solve_mixed_stackelberg, solve_pure_stackelberg


def main():
    print(f"{'game':<18}{'scale':>6}  {'pure x':<12}{'U_L':>6}  {'mixed x':<16}{'U_L':>8}{'U_S norm':>10}")
    for name in list_builtin():
        g = load_builtin(name)
        pure, mixed = solve_pure_stackelberg(g), solve_mixed_stackelberg(g)
        us = solve_pure_stackelberg(normalize(g)).total_value
        px = "/".join(f"{p:g}" for p in pure.commitment.probs)
        mx = "/".join(f"{p:.3g}" for p in mixed.commitment.probs)
        print(f"{name:<18}{normalize(g).scale:>6g}  {px:<12}{pure.leader_value:>6g}  {mx:<16}{mixed.leader_value:>8.3f}{us:>10.3f}")


if __name__ == "__main__":
    main()
