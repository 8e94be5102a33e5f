"""Run every Monte Carlo oracle and print estimate against target.

Factorized posteriors (one independent marginal per state) cannot explore a
tree faster than uniform: the chance of sampling UP at all L states is at
most 2^-L. The Gumbel checks show any policy can be represented by a
factorized Q model, and the tied-action and covariance checks probe when
correlated posteriors escape that bound.
"""
from successor_uncertainties.theory import run_all_oracles


def main():
    reports = run_all_oracles(n_samples=20_000)
    width = max(len(r.name) for r in reports)
    for r in reports:
        mark = "pass" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {mark}  estimate {r.estimate:.5g}  target {r.bound_or_target:.5g}"
              f"  (se {r.mc_stderr:.1e}, n={r.n_samples})")


if __name__ == "__main__":
    main()
