#!/usr/bin/env python3
"""Print stationary survival brackets next to the closed-form predictors.

The truncated fixed-point oracle yields certified lower/upper bounds on
P(X > x); this script lines them up against the leading-order tail and the
two-term refinement so you can see where each predictor starts to earn its
keep (and where it doesn't yet).

Example:
    python3 scripts/tail_bracket_demo.py --cutoff 65536 --xs 64,256,1024,4096
"""

import argparse

from bigjump import asymptotics, oracle
from bigjump.model import calibrate


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--b", type=float, default=0.5)
    parser.add_argument("--epsilon", type=float, default=1.0)
    parser.add_argument("--cutoff", type=int, default=1 << 14)
    parser.add_argument(
        "--xs",
        default="64,256,1024",
        help="comma-separated thresholds (each must stay below the cutoff)",
    )
    args = parser.parse_args()

    params = calibrate(args.b, args.epsilon)
    xs = [int(tok) for tok in args.xs.split(",")]
    print(f"assembling stationary law (cutoff {args.cutoff}) ...", flush=True)
    pmf = oracle.stationary_pmf(params, args.cutoff)
    print(f"  {pmf.meta}; unplaced mass {pmf.overflow:.3e}\n")

    header = (
        f"{'x':>8} {'lower':>12} {'upper':>12} "
        f"{'leading':>12} {'two-term':>12} {'up/lead':>9} {'up/two':>9}"
    )
    print(header)
    print("-" * len(header))
    for x in xs:
        lo, hi = pmf.survival_bracket(x)
        lead = asymptotics.leading_tail(params, float(x))
        two = asymptotics.two_scale_total(params, float(x))
        print(
            f"{x:>8} {lo:>12.6e} {hi:>12.6e} "
            f"{lead:>12.6e} {two:>12.6e} {hi / lead:>9.4f} {hi / two:>9.4f}"
        )


if __name__ == "__main__":
    main()
