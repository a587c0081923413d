"""Grid refinement: entropy error at t = 1 and observed order per scheme.

    python scripts/refinement_study.py [--sizes 32 64 128 256]
"""

import argparse
import math

from hypoflow import checks as K
from hypoflow import flow as F
from hypoflow import grid as G
from hypoflow import oracles as O


def entropy_error(n, scheme, t=1.0):
    grid = G.build_grid(K.quadratic_model(), 8.0, 8.0, n, n)
    dt = F.aligned_dt(F.stability_limit(grid), t)
    rep = F.run(grid, F.gaussian_initial(grid), K.benchmark_constants(), t,
                int(round(t / dt)), dt, scheme)
    return abs(rep.rows[-1]["ent"] / O.gaussian_entropy_at(t) - 1)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128, 256])
    ap.add_argument("--schemes", nargs="+", default=list(F.SCHEMES))
    args = ap.parse_args()
    for scheme in args.schemes:
        errs = [entropy_error(n, scheme) for n in args.sizes]
        print(scheme)
        for i, (n, e) in enumerate(zip(args.sizes, errs)):
            order = "" if i == 0 else f"  order {math.log2(errs[i - 1] / e):.2f}"
            print(f"  n={n:4d}  rel err {e:.3e}{order}")


if __name__ == "__main__":
    main()
