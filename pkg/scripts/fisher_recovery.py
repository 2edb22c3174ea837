"""Seed sweep for observation-cost recovery by Fisher scoring.

Shows how often a 10k-sample fit lands within a given relative error of the
generating parameters, next to the asymptotic standard errors.

    python3 scripts/fisher_recovery.py [--seeds 40] [--n 10000] [--tol 0.05]
"""

import argparse

import numpy as np

from flowtrack.costs import fit_observation_cost


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=40)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--tol", type=float, default=0.05)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--beta", type=float, default=-3.0)
    ap.add_argument("--bias", type=float, default=-2.0)
    args = ap.parse_args()

    errs = []
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        c = rng.random(args.n)
        p = 1.0 / (1.0 + np.exp(args.bias + args.alpha + args.beta * c))
        y = (rng.random(args.n) < p).astype(float)
        fit = fit_observation_cost(np.column_stack([c, y]), bias=args.bias)
        errs.append((abs(fit.alpha / args.alpha - 1), abs(fit.beta / args.beta - 1)))
    errs = np.array(errs)

    # Fisher information of the generating model on a dense c grid
    c = np.linspace(0, 1, 100_001)
    p = 1.0 / (1.0 + np.exp(args.bias + args.alpha + args.beta * c))
    w = p * (1 - p)
    info = args.n * np.array([[w.mean(), (w * c).mean()], [(w * c).mean(), (w * c * c).mean()]])
    se = np.sqrt(np.diag(np.linalg.inv(info)))
    print(f"n={args.n}: relative SE alpha {se[0] / abs(args.alpha):.3f}, beta {se[1] / abs(args.beta):.3f}")
    print(f"median rel. error alpha {np.median(errs[:, 0]):.3f}, beta {np.median(errs[:, 1]):.3f}")
    both = np.mean(np.all(errs <= args.tol, axis=1))
    print(f"seeds with both within {args.tol:.0%}: {both:.0%} of {args.seeds}")


if __name__ == "__main__":
    main()
