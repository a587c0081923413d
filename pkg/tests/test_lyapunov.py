from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypoflow import checks as K
from hypoflow import constants as C
from hypoflow import grid as G
from hypoflow import lyapunov as L
from hypoflow.potential import HamiltonianModel, PotentialSpec

UNIT = st.floats(0.05, 0.95)
QUAD = HamiltonianModel(PotentialSpec.quadratic(), 0.0)
QUARTIC = HamiltonianModel(PotentialSpec.monomial(4), 0.25)
QUARTIC_ETA1 = HamiltonianModel(PotentialSpec.monomial(4), 1.0)


def test_ratio_examples():
    c = L.LyapunovCandidate(0.5, 0.5)
    assert L.lyapunov_ratio(QUAD, c, 0.0, 0.0) == 1.0
    assert L.lyapunov_ratio(QUAD, c, 2.0, 2.0) == -1.0


@given(x=st.floats(-6, 6), y=st.floats(-6, 6))
def test_ratio_quadratic_simplifies(x, y):
    r = L.lyapunov_ratio(QUAD, L.LyapunovCandidate(0.5, 0.5), x, y)
    assert r == pytest.approx(1 - x * x / 4 - y * y / 4, abs=1e-12)


def test_candidate_bounds():
    with pytest.raises(ValueError):
        L.LyapunovCandidate(1.0, 0.5)
    assert L.LyapunovCandidate(0.3, 0.2).lower_bound() == pytest.approx(np.exp(0.3))


@lru_cache(maxsize=None)
def _grid(spec, eta, R, n):
    return G.build_grid(HamiltonianModel(spec, eta), R, 8.0, n, n)


@pytest.mark.parametrize("spec,R", [(PotentialSpec.quadratic(), 8.0), (PotentialSpec.monomial(4), 2.6),
                                    (PotentialSpec.monomial(6), 2.2)], ids=["quadratic", "l4", "l6"])
@settings(max_examples=6)
@given(a=UNIT, b=UNIT, eta=st.sampled_from([0.0, 0.25, 0.5]))
def test_discrete_ratio_second_order(spec, R, a, b, eta):
    cand = L.LyapunovCandidate(a, b)
    errs = []
    # steep potentials (l=6, large alpha) are still pre-asymptotic at n=128
    for n in (256, 512):
        g = _grid(spec, eta, R, n)
        m = g.interior(4) & (np.abs(g.X) < 0.7 * R) & (np.abs(g.Y) < 5)
        d = L.discrete_ratio(g, cand.log_w(g.U, g.Y))
        errs.append(np.max(np.abs(d - L.lyapunov_ratio(g.model, cand, g.X, g.Y))[m]))
    assert errs[0] / errs[1] >= 3.0


def test_verify_examples():
    c = L.LyapunovCandidate(0.5, 0.5)
    cert = L.verify_certificate(QUAD, c, 0.5, 2.0, (8.0, 8.0))
    # pointwise slack is exactly 1/2 for this choice
    assert cert.holds and cert.margin == pytest.approx(0.5, abs=1e-12)
    bad = L.verify_certificate(QUAD, c, 1e6, 0.0, (5.0, 5.0))
    assert not bad.holds and bad.margin < 0
    assert L.lyapunov_ratio(QUAD, c, 0.0, 0.0) > -1e6 * 1.0   # already violated at the origin
    with pytest.raises(ValueError):
        L.verify_certificate(QUAD, c, 0.0, 1.0)


def test_edge_trend_flag():
    # lambda too steep for the asymptotic slope 1/2: fine on a tiny box, fails in the probe ring
    cert = L.verify_certificate(QUAD, L.LyapunovCandidate(0.5, 0.5), 0.7, 3.0, (2.0, 2.0))
    assert cert.holds and not cert.edge_trend_ok and cert.warnings


@pytest.fixture(scope="module")
def quartic_search():
    return L.search_candidate(QUARTIC, region=(3.0, 6.0))


def test_search_quadratic_feasible():
    res = L.search_candidate(QUAD, region=(6.0, 6.0), alphas=np.linspace(0.1, 0.9, 9),
                             betas=np.linspace(0.1, 0.9, 9))
    assert res.feasible and res.best.margin > 0


def test_search_quartic_feasible_and_stable(quartic_search):
    res = quartic_search
    assert res.feasible and res.best.margin > 0
    b = res.best
    fine = L.verify_certificate(QUARTIC, b.candidate, b.lambda_drift, b.b_drift, (3.0, 6.0), 401)
    assert fine.holds


def test_search_quartic_eta1_infeasible():
    res = L.search_candidate(QUARTIC_ETA1, region=(10.0, 10.0), alphas=np.linspace(0.05, 0.95, 10),
                             betas=np.linspace(0.05, 0.95, 10))
    assert not res.feasible and res.best is None and res.reason


def test_search_independent_of_workers(monkeypatch):
    kw = dict(region=(3.0, 6.0), alphas=[0.1, 0.3], betas=[0.2, 0.5], n_scan=101)
    monkeypatch.setenv("HYPOFLOW_THREADS", "1")
    a = L.search_candidate(QUARTIC, **kw).to_dict()
    monkeypatch.setenv("HYPOFLOW_THREADS", "4")
    assert L.search_candidate(QUARTIC, **kw).to_dict() == a


def test_corollary3_examples():
    r = L.corollary3_check(QUARTIC, R=1.0)
    assert r["holds"] and r["kappa_found"] == pytest.approx(0.75, rel=1e-12)
    r = L.corollary3_check(QUAD, R=2.0)
    assert r["holds"] and r["kappa_found"] == pytest.approx(0.25, rel=1e-12)
    r = L.corollary3_check(QUARTIC_ETA1, R=1.0)
    assert not r["holds"]
    # c -> 0 as the region grows: 16 x^6 / (1 + x^4)^3
    small = L.corollary3_check(QUARTIC_ETA1, R=1.0, x_max=5.0)["c_found"]
    large = L.corollary3_check(QUARTIC_ETA1, R=1.0, x_max=50.0)["c_found"]
    assert large < small / 100


def test_corollary3_vanishing_gradient():
    flat = HamiltonianModel(PotentialSpec.polynomial([1.0, 0.0, -2.0, 0.0, 1.0], offset=1.0), 0.0)
    r = L.corollary3_check(flat, R=1.0)   # U' = 0 at x = +-1
    assert not r["holds"] and r["grad_floor"] == 0.0


def test_theta_scan_examples():
    q = L.theta_scan(QUAD, np.linspace(2, 40, 12))
    assert np.all(q.theta == 1.0) and q.C0 == 0.0 and q.fit_ok
    quartic = L.theta_scan(QUARTIC, np.linspace(2, 40, 20))
    # theta(r) = 12 (r - 1)^(1/2) on the shell, r >= 2
    assert np.allclose(quartic.theta, 12 * np.sqrt(quartic.radii - 1), rtol=1e-9)
    assert quartic.fit_ok and quartic.C0 < 0.2
    se = L.theta_scan(HamiltonianModel(PotentialSpec.stretched_exp(1, 0.5), 0.5), np.linspace(3, 60, 12))
    assert se.fit_ok and np.all(se.theta >= 1)


def test_theta_scan_rejects_unsorted():
    with pytest.raises(ValueError):
        L.theta_scan(QUAD, [3.0, 2.0])


@settings(max_examples=25)
@given(seed=st.integers(0, 2**32 - 1))
def test_lemma_random_pairs(quartic_grid64, seed):
    rng = np.random.default_rng(seed)
    g, lw = K.random_lemma_pair(quartic_grid64, rng)
    assert L.lemma_ipp_check(quartic_grid64, g, lw)["ok"]


def test_lemma_examples(quad_grid64):
    g = quad_grid64
    lw = L.LyapunovCandidate(0.4, 0.3).log_w(g.U, g.Y)
    plateau = G.bump(g.X, 0, 6) ** 0.01 * G.bump(g.Y, 0, 6) ** 0.01
    r = L.lemma_ipp_check(g, plateau, lw)
    assert r["ok"]
    r = L.lemma_ipp_check(g, np.exp(lw - lw.max()), lw)
    assert r["lhs"] == pytest.approx(r["rhs"], rel=1e-10)


def test_gap_quadratic_and_dense(quad_grid):
    res = L.spectral_gap(quad_grid)
    assert res.gap == pytest.approx(1.0, abs=0.02)
    assert abs(quad_grid.integrate(res.field)) < 1e-10          # mu-mean zero
    small = G.build_grid(QUAD, 8.0, 8.0, 32, 32)
    assert abs(L.spectral_gap(small).gap - L.dense_gap(small)) <= 1e-8


def test_gap_quartic_refinement(quartic_model):
    gaps = [L.spectral_gap(G.build_grid(quartic_model, 2.6, 8.0, n, n)).gap for n in (32, 64, 128)]
    assert all(g > 0 for g in gaps)
    assert abs(gaps[2] - gaps[1]) <= 0.05 * gaps[2]


def test_gap_monotone_under_domain_growth():
    g1 = L.spectral_gap(G.build_grid(QUAD, 7.0, 7.0, 96, 96)).gap
    g2 = L.spectral_gap(G.build_grid(QUAD, 8.0, 8.0, 110, 110)).gap
    assert g2 <= g1 * (1 + 1e-3)


def test_poincare_chain_is_upper_bound(quad_grid):
    gap = L.spectral_gap(quad_grid).gap
    c1 = 1.0 / L.marginal_gap(QUAD).gap
    assert 1.0 / gap <= C.propagate_poincare_constant(c1, C.m2_quadrature(0.0))
    assert c1 == pytest.approx(1.0, rel=1e-3)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("HYPOFLOW_THREADS", "3")
    assert L.worker_count() == 3
    monkeypatch.setenv("HYPOFLOW_THREADS", "x")
    with pytest.raises(ValueError):
        L.worker_count()
