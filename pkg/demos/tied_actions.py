"""Tied-action trees: BDQN-style sampling with shared features.

When both actions share one feature vector, a Bayesian linear head samples
each action's weights independently, and success means sampling UP at the
d tied states. The lower bound 2^-d (sigmoid features) does not depend on
the tree length, but the success probability itself decays towards it.
"""
from successor_uncertainties import theory


def main():
    for d in (1, 3):
        print(f"sigmoid, d={d}: bound {theory.tied_action_success_bound(d, 10, 'sigmoid'):.4f}")
        for L in (5, 10, 20, 50):
            r = theory.check_tied_action_bdqn(d, L, "sigmoid", 50_000)
            print(f"   L={L:>3}: success {r.estimate:.4f}  median episodes {r.details['median_episodes']}")
    r = theory.check_tied_action_bdqn(10, 100, "relu", 50_000)
    print(f"relu, d=10, L=100: success {r.estimate:.5f} >= bound {r.bound_or_target:.5f}")


if __name__ == "__main__":
    main()
