import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hypoflow.potential import (DomainError, HamiltonianModel, IncompatibleEtaError, PotentialSpec,
                                eval_hamiltonian, eval_potential, first_steep_radius,
                                hessian_weight_bound, recommended_eta)

# central finite differences of exp(|x|^(1/2)) at x = 4, h = 1e-4 (scripts/oracle_values.py)
STRETCHED_FD_AT_4 = (7.38905609893065, 1.8472640247857441, 0.2309079150109028)
# dense 4010 x 651 scan of 12 x^2 (1 + x^4 + y^2/2)^(-1/2) over [-5, 5]^2
QUARTIC_HESS_SCAN = 11.990411504661472

SPECS = [PotentialSpec.quadratic(), PotentialSpec.monomial(4), PotentialSpec.monomial(6),
         PotentialSpec.stretched_exp(1.0, 0.5), PotentialSpec.polynomial([1.0, 0.3, 0.5, 0.0, 1.0], offset=1.0)]


def test_quartic_at_one():
    assert eval_potential(PotentialSpec.monomial(4), 1.0) == (2.0, 4.0, 12.0)


def test_quadratic_at_zero():
    assert eval_potential(PotentialSpec.quadratic(), 0.0) == (1.0, 0.0, 1.0)


def test_stretched_exp_matches_finite_differences():
    u, du, d2u = eval_potential(PotentialSpec.stretched_exp(1.0, 0.5), 4.0)
    for got, ref in zip((u, du, d2u), STRETCHED_FD_AT_4):
        assert got == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.family)
@given(x=st.floats(0.2, 3.0) | st.floats(-3.0, -0.2))
def test_derivatives_match_central_differences(spec, x):
    h = 1e-4
    u0 = eval_potential(spec, x)
    up, um = eval_potential(spec, x + h), eval_potential(spec, x - h)
    fd1 = (up[0] - um[0]) / (2 * h)
    fd2 = (up[1] - um[1]) / (2 * h)
    assert u0[1] == pytest.approx(fd1, rel=1e-5, abs=1e-8)
    assert u0[2] == pytest.approx(fd2, rel=1e-5, abs=1e-8)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.family)
@given(x=st.floats(-6, 6))
def test_potential_at_least_one(spec, x):
    assert eval_potential(spec, x)[0] >= 1.0


def test_below_one_rejected():
    with pytest.raises(DomainError):
        eval_potential(PotentialSpec.quadratic(offset=0.0), 0.0)


def test_overflow_rejected():
    with pytest.raises(DomainError):
        eval_potential(PotentialSpec.stretched_exp(1.0, 0.5), 1e7)


@pytest.mark.parametrize("kw", [dict(family="cubic"), dict(family="even-monomial", l=3),
                                dict(family="stretched-exp", a=-1.0),
                                dict(family="polynomial", coefficients=(1.0, 1.0, 0.0, 1.0))])
def test_invalid_specs(kw):
    with pytest.raises(ValueError):
        PotentialSpec(**kw)


def test_hamiltonian_examples():
    h, grad, w = eval_hamiltonian(HamiltonianModel(PotentialSpec.quadratic(), 0.7), 0.0, 0.0)
    assert (h, grad, w) == (1.0, (0.0, 0.0), 1.0)
    h, _, w = eval_hamiltonian(HamiltonianModel(PotentialSpec.monomial(4), 0.25), 1.0, 2.0)
    assert h == 4.0 and w == pytest.approx(0.5, rel=1e-15)


@given(x=st.floats(-5, 5), y=st.floats(-20, 20), eta=st.floats(0, 2))
def test_weight_sandwich(x, y, eta):
    m = HamiltonianModel(PotentialSpec.monomial(4), eta)
    _, _, w = eval_hamiltonian(m, x, y)
    p1, p2 = m.phi1(x), m.phi2(y)
    tol = 4 * np.finfo(float).eps
    assert p1 * p2 <= w * (1 + tol)
    assert w <= min(p1, p2) * (1 + tol)
    assert 0 < w <= 1


def test_hessian_bound_quadratic():
    hb = hessian_weight_bound(HamiltonianModel(PotentialSpec.quadratic(), 0.0))
    assert hb.value == pytest.approx(1.0, abs=1e-12) and not hb.diverging


def test_hessian_bound_quartic_matches_dense_scan():
    hb = hessian_weight_bound(HamiltonianModel(PotentialSpec.monomial(4), 0.25))
    assert not hb.diverging
    assert hb.value >= QUARTIC_HESS_SCAN - 1e-12
    assert hb.value == pytest.approx(QUARTIC_HESS_SCAN, rel=1e-6)


def test_hessian_bound_flags_divergence():
    assert hessian_weight_bound(HamiltonianModel(PotentialSpec.monomial(4), 0.0)).diverging


@pytest.mark.parametrize("l", [4, 6, 8])
def test_recommended_eta_is_borderline(l):
    spec = PotentialSpec.monomial(l)
    eta = recommended_eta(spec)
    assert eta == pytest.approx(0.5 - 1 / l)
    assert not hessian_weight_bound(HamiltonianModel(spec, eta), (-3, 3)).diverging
    assert hessian_weight_bound(HamiltonianModel(spec, eta / 2), (-3, 3)).diverging


def test_recommended_eta_families():
    assert recommended_eta(PotentialSpec.quadratic()) == 0.0
    assert recommended_eta(PotentialSpec.stretched_exp(1.0, 0.5)) == 0.5
    with pytest.raises(IncompatibleEtaError):
        recommended_eta(PotentialSpec.stretched_exp(1.0, 2.0))


@given(lo=st.floats(1.0, 3.0), grow=st.floats(1.0, 2.0))
def test_hessian_bound_monotone_in_domain(lo, grow):
    m = HamiltonianModel(PotentialSpec.monomial(4), 0.25)
    a = hessian_weight_bound(m, (-lo, lo), n_scan=101).value
    b = hessian_weight_bound(m, (-lo * grow, lo * grow), n_scan=101).value
    assert b >= a - 1e-9


def test_first_steep_radius_quartic():
    # U' = 4x^3 reaches 40 at x = 10^(1/3)
    r = first_steep_radius(PotentialSpec.monomial(4))
    assert abs(r - 10 ** (1 / 3)) < 0.06
    assert math.isfinite(r)
