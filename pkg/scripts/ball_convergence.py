"""Convergence of finite-size ball probabilities to the limit measure.

For each N the exact finite-size mass of a few small balls is printed next
to the limit value.

    python3 scripts/ball_convergence.py --t 2
    python3 scripts/ball_convergence.py --mu 1
"""
from __future__ import annotations

import argparse
import csv
import sys
from fractions import Fraction

from hwtrees.measure import BallSpec, lambda_ball, nuN_ball_exact, xi_ball
from hwtrees.series import build_tables
from hwtrees.trees import decode

BALLS = ["", "()", "()()", "(())", "(())()", "(()())"]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    g = ap.add_mutually_exclusive_group(required=True)
    g.add_argument("--t", help="rational weight, heights rewarded when t > 1")
    g.add_argument("--mu", type=float, help="height penalty, mu > 0")
    ap.add_argument("--sizes", default="10,20,40,80,160")
    ap.add_argument("--out", help="CSV path (default stdout)")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    tables = build_tables(max(sizes))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(out)
    writer.writerow(["ball", "N", "finite", "limit"])
    for word in BALLS:
        spec = BallSpec(decode(word))
        if args.t is not None:
            t = Fraction(args.t)
            limit = float(lambda_ball(spec, t).value) if t > 1 else None
            finite = [nuN_ball_exact(spec, n, tables, t=t).value for n in sizes]
        else:
            limit = float(xi_ball(spec, args.mu).value)
            finite = [nuN_ball_exact(spec, n, tables, mu=args.mu).value for n in sizes]
        for n, value in zip(sizes, finite):
            writer.writerow([repr(word), n, f"{float(value):.10g}",
                             "" if limit is None else f"{limit:.10g}"])


if __name__ == "__main__":
    main()
