import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from hypoflow import constants as C

# scripts/oracle_values.py (adaptive quadrature)
I_AT_1 = 0.16809124072457832
I_AT_10 = 8.500090798828948
ENVELOPE_AT_10 = 0.9999104350881116
M2 = {0.25: 0.8598866396410088, 0.5: 0.7578721561413121, 1.0: 0.621063921929344}


def test_benchmark_constants():
    c = C.theorem1_constants(0.0, 1, 1.0, 2.0)
    assert c.lam == 9.0
    assert c.kappa == pytest.approx(1 / 1300, rel=1e-15)
    assert c.epsilon == pytest.approx(1 / 36, rel=1e-15)


def test_constant_examples():
    c = C.theorem1_constants(0.25, 1, 0.0, 1.0)
    assert c.lam == 4.0 and c.kappa == pytest.approx(1 / (1300 * 1.25**4), rel=1e-15)
    assert C.theorem1_constants(0.0, 3, 1.0, 1.0).kappa == pytest.approx(1 / (1300 * 81), rel=1e-15)


@pytest.mark.parametrize("rho", [0.0, -1.0])
def test_rho_must_be_positive(rho):
    with pytest.raises(C.InvalidConstantError):
        C.theorem1_constants(0.0, 1, 1.0, rho)


@given(eta=st.floats(0, 3), d=st.integers(1, 5), hb=st.floats(0, 100), rho=st.floats(1e-3, 1e3))
def test_epsilon_in_unit_interval_and_scaling(eta, d, hb, rho):
    a = C.theorem1_constants(eta, d, hb, rho)
    b = C.theorem1_constants(eta, d, 2 * hb, rho)
    assert 0 < a.epsilon < 1
    assert (a.kappa, a.epsilon, a.rho) == (b.kappa, b.epsilon, b.rho)
    assert b.lam == (2 * hb + 2) ** 2


def test_rate_integral_values():
    assert C.rate_integral(0.0) == 0.0
    assert abs(C.rate_integral(1.0) - I_AT_1) <= 1e-10
    assert abs(C.rate_integral(10.0) - I_AT_10) <= 1e-10
    assert C.rate_integral(50.0) == pytest.approx(48.5, abs=1e-12)


@pytest.mark.parametrize("t", [0.1, 0.5, 1, 2, 5, 10, 50])
def test_rate_integral_vs_quadrature(t):
    ref = integrate.quad(lambda s: (-math.expm1(-s)) ** 2, 0, t, epsabs=1e-13, limit=200)[0]
    assert abs(C.rate_integral(t) - ref) <= 1e-10


@given(t=st.floats(0, 1e-2))
def test_rate_integral_small_t_branch_continuous(t):
    ref = integrate.quad(lambda s: (-math.expm1(-s)) ** 2, 0, t, epsabs=1e-20, epsrel=1e-12)[0]
    assert C.rate_integral(t) == pytest.approx(ref, rel=1e-9, abs=1e-22)


def test_envelope_examples():
    c = C.theorem1_constants(0.0, 1, 1.0, 2.0)
    assert C.decay_envelope(c, 0.0, 3.0) == 0.0
    assert C.decay_envelope(c, 0.7, 0.0) == 0.7
    assert C.decay_envelope(c, 1.0, 10.0) == pytest.approx(ENVELOPE_AT_10, rel=1e-12)


@given(t1=st.floats(0, 100), dt=st.floats(0, 100), rho=st.floats(1e-2, 1e3), drho=st.floats(0, 1e3))
def test_envelope_monotone_in_t_and_rho(t1, dt, rho, drho):
    c = C.theorem1_constants(0.0, 1, 1.0, rho)
    c2 = C.theorem1_constants(0.0, 1, 1.0, rho + drho)
    assert C.decay_envelope(c, 1.0, t1 + dt) <= C.decay_envelope(c, 1.0, t1)
    assert C.decay_envelope(c2, 1.0, t1) >= C.decay_envelope(c, 1.0, t1)


def test_multiplier_limits():
    s = C.MultiplierSchedule(0.0, 1 / 36)
    assert np.all(C.multiplier_matrix(s, 0.0, 3.0) == 0)
    M = C.multiplier_matrix(s, 60.0, 1.0)
    e = 1 / 36
    assert np.allclose(M, [[e**3, e**2], [e**2, 2 * e]], rtol=1e-14)
    assert np.linalg.det(M) == pytest.approx(e**4, rel=1e-8)


@given(t=st.floats(0, 50), H=st.floats(1, 1e6), eta=st.floats(0, 2))
def test_multiplier_psd(t, H, eta):
    s = C.theorem1_constants(eta, 1, 1.0, 1.0).schedule()
    w = np.linalg.eigvalsh(C.multiplier_matrix(s, t, H))
    assert w.min() >= -1e-14


@given(t=st.floats(0, 20), H=st.floats(1, 100), gx=st.floats(-10, 10), gy=st.floats(-10, 10))
def test_quadratic_form_identity(t, H, gx, gy):
    s = C.MultiplierSchedule(0.25, 1 / 56.25)
    M = C.multiplier_matrix(s, t, H)
    v = np.array([gx, gy])
    q = float(C.quadratic_form(s, t, H, gx, gy))
    ref = float(v @ M @ v)
    assert q == pytest.approx(ref, rel=4 * np.finfo(float).eps * 10, abs=1e-300 + 1e-15 * abs(ref))


def test_m2_values():
    assert C.m2_quadrature(0.0) == 1.0
    for eta, ref in M2.items():
        assert C.m2_quadrature(eta) == pytest.approx(ref, abs=1e-8)
    assert 0 < C.m2_quadrature(0.5) < 1
    assert C.m2_quadrature(0.25) > C.m2_quadrature(0.5)


def test_m2_higher_dimension_consistent():
    # d = 2: E[(1 + |y|^2/2)^(-2 eta)] with |y|^2/2 ~ Exp(1)
    ref = integrate.quad(lambda u: math.exp(-u) * (1 + u) ** -1.0, 0, np.inf)[0]
    assert C.m2_quadrature(0.5, d=2) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("c1,m2,out", [(2, 1, 8), (1, 1, 6), (10, 0.5, 80)])
def test_propagation_examples(c1, m2, out):
    assert C.propagate_poincare_constant(c1, m2) == out
