"""Discrete hedging of a call under physical drift and default intensities.

Prints the RMS replication error relative to the public value for a range of
rebalancing frequencies.
"""

import argparse

from xva.analytic import ClaimSpec
from xva.bsde import GridConfig, solve
from xva.market import CreditParams, EquityParams, MarketParams, RateSet
from xva.replication import replicate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=1000)
    ap.add_argument("--steps", type=int, nargs="+", default=[100, 1000, 10_000])
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=8)
    args = ap.parse_args()

    credit = CreditParams(h_I_P=0.1, h_C_P=0.25, h_I_Q=0.15, h_C_Q=0.2, L_I=0.5, L_C=0.5)
    params = MarketParams(RateSet.flat(0.05), credit, EquityParams(100.0, 0.2, mu=0.09), alpha=args.alpha)
    claim = ClaimSpec.call(100.0, 1.0)
    sol = solve(claim, params, grid=GridConfig(1000, 400))
    print(f"value {sol.v0:.6f}  public value {sol.vhat0:.6f}")
    print("steps  rms_error  relative  defaulted")
    for n in args.steps:
        res = replicate(sol, params, claim, n_paths=args.paths, n_steps=n, seed=args.seed)
        print(f"{n:5d}  {res.rms:9.5f}  {res.relative_rms:8.4%}  {res.defaulted.mean():9.3f}")


if __name__ == "__main__":
    main()
