"""Fit the transform-side rate over sliding three-decade windows of lambda.

Shows how the fitted exponent approaches its limit as lambda grows:

    python3 scripts/laplace_sweep.py --offspring "{2:.5,3:.5}" --model stretched
    python3 scripts/laplace_sweep.py --offspring "{1:.5,2:.5}" --immigration "{1:1}" --model logsq
"""

import argparse

import numpy as np

from branchtail.distributions import ImmigrationSpec, OffspringSpec, parse_literal
from branchtail.laplace import fit_lt_rate, laplace_curve


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--offspring", required=True)
    ap.add_argument("--immigration")
    ap.add_argument("--model", choices=["power", "logsq", "stretched"], required=True)
    ap.add_argument("--lo", type=float, default=1.0)
    ap.add_argument("--hi", type=float, default=1e15)
    ap.add_argument("--window", type=float, default=3.0, help="decades per fit window")
    args = ap.parse_args()

    off = OffspringSpec(parse_literal(args.offspring))
    imm = ImmigrationSpec(parse_literal(args.immigration)) if args.immigration else None
    variant = "curlyW" if imm else "W_only"
    starts = np.arange(np.log10(args.lo), np.log10(args.hi) - args.window + 1e-9, 1.0)
    print("window            coefficient   exponent    r2")
    for s in starts:
        lam = np.logspace(s, s + args.window, 25)
        coef, expo, r2 = fit_lt_rate(laplace_curve(off, imm, lam, variant), args.model)
        print(f"[1e{s:.0f}, 1e{s + args.window:.0f}]  {coef:12.6g} {expo:10.6g} {r2:9.6f}")


if __name__ == "__main__":
    main()
