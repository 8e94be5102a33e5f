"""Where the SU covariance guarantee breaks down.

With N visits below the frontier, the claim is that UP at s_k covaries more
with UP at the root than DOWN does, except with probability eps_N. Checking
each decision state separately shows the guarantee holds deep in the tree
but not a level or two above the bottom: the subtree variance shrinks like
(gamma/2)^(2m) per level, faster than the 2^-m the bound assumes.
"""
from successor_uncertainties import theory


def main():
    L = 10
    for N in (20, 50):
        r = theory.check_su_covariance(L, N, n_resamples=2000)
        eps = r.details["epsilon_N"]
        print(f"N={N}: eps_N={eps:.2e}, required frequency >= {1 - eps:.5f}")
        for k, f in r.details["frequency_by_k"].items():
            flag = "  <-- below bound" if k in r.details["failing_k"] else ""
            print(f"   k={k:>2}: condition holds in {f:.4f} of resamples{flag}")


if __name__ == "__main__":
    main()
