"""Episodes-to-solve on the deep-sea chain, fitted on log-log axes.

The chain is an L x L grid where the agent falls one row per step and must
move right every time; moving right costs a little, so greedy agents learn
to stay left. A polynomial T(L) ~ L^slope shows up as a straight line.
"""
import math

from successor_uncertainties import harness


def main():
    sizes = [4, 6, 8, 10]
    summary = harness.run_sweep("chain", sizes, ["bootstrap", "su"], seeds=3, max_episodes=3000)
    for c in summary.cells:
        med = "CENSORED" if math.isinf(c.median) else f"{c.median:.0f}"
        print(f"{c.agent:>10} L={c.size:>3}: median {med:>8}  solved {c.n_solved}/{c.n_seeds}")
    for f in summary.fits:
        print(f"{f.agent}: log10 T = {f.slope:.2f} log10 L {f.intercept:+.2f}  (sizes {f.sizes})")
    if not summary.fits:
        print("no fit: fewer than two sizes had a finite median")


if __name__ == "__main__":
    main()
