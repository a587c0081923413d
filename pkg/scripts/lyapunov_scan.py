"""Certificate search and growth diagnostics for a family of potentials.

    python scripts/lyapunov_scan.py

A feasible certificate is local to the scanned box; with eta above the
recommended value the growth check is the one that fails globally.
"""

from hypoflow import lyapunov as L
from hypoflow.potential import HamiltonianModel, PotentialSpec, recommended_eta


def main():
    cases = [("quadratic", PotentialSpec.quadratic(), (6.0, 6.0)),
             ("x^4", PotentialSpec.monomial(4), (3.0, 6.0)),
             ("x^6", PotentialSpec.monomial(6), (2.0, 6.0))]
    for name, spec, region in cases:
        eta = recommended_eta(spec)
        for e in sorted({eta, 1.0}):
            model = HamiltonianModel(spec, e)
            s = L.search_candidate(model, region=region, n_scan=121)
            g = L.corollary3_check(model)
            best = s.best
            desc = (f"alpha={best.candidate.alpha:.2f} beta={best.candidate.beta:.2f} "
                    f"lambda={best.lambda_drift:.3g} b={best.b_drift:.3g}") if s.feasible else s.reason
            print(f"{name:9s} eta={e:.3g}  feasible={s.feasible}  {desc}  growth holds={g['holds']}")


if __name__ == "__main__":
    main()
