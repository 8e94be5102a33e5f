"""Which agents find the single reward at the bottom of a binary tree?

Each tree of depth L has one rewarding path; at every level one action goes
UP (towards the reward) and the other drops to an absorbing DOWN chain. A
uniform explorer needs about 2^L episodes. This script runs every agent on a
few depths and prints the median episodes-to-solve per cell.

    python demos/tree_exploration.py            # quick: L in {4, 8, 12}, 3 seeds
    python demos/tree_exploration.py 5 20 5     # L in 5..20 step 5
"""
import sys
import time

from successor_uncertainties import harness

AGENTS = ["uniform", "ube", "bdqn", "bootstrap", "su"]


def main(argv):
    lo, hi, step = (int(x) for x in argv) if argv else (4, 12, 4)
    sizes = list(range(lo, hi + 1, step))
    t0 = time.perf_counter()
    summary = harness.run_sweep("tree", sizes, AGENTS, seeds=3, max_episodes=2000)
    print(f"{'agent':>10} " + " ".join(f"L={L:>4}" for L in sizes))
    for agent in AGENTS:
        row = []
        for L in sizes:
            c = summary.cell("tree", L, agent)
            row.append(" cens." if c.median == float("inf") else f"{c.median:>6.0f}")
        print(f"{agent:>10} " + " ".join(row))
    print("uniform reference 2^L: " + ", ".join(str(2 ** L) for L in sizes))
    print(f"({time.perf_counter() - t0:.0f} s; 'cens.' = median run hit the episode cap)")


if __name__ == "__main__":
    main(sys.argv[1:])
