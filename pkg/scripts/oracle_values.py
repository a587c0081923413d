"""Reference numbers frozen into the test suite.

Every value here is computed by a route that does not share code with the
package: adaptive quadrature instead of closed forms, finite differences
instead of analytic derivatives, dense scans instead of polished maxima,
and a Van Loan block exponential instead of the covariance ODE.

    python scripts/oracle_values.py
"""

import math

import numpy as np
from scipy import integrate
from scipy.linalg import expm


def rate_integral_quad(t):
    return integrate.quad(lambda s: (1 - math.exp(-s)) ** 2, 0, t, epsabs=1e-13, epsrel=1e-13,
                          limit=400)[0]


def m2_quad(eta):
    f = lambda y: math.exp(-0.5 * y * y) * (1 + 0.5 * y * y) ** (-2 * eta) / math.sqrt(2 * math.pi)
    return integrate.quad(f, -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13)[0]


def stretched_fd(x, a=1.0, b=0.5, h=1e-4):
    U = lambda t: math.exp(a * abs(t) ** b)
    du = (U(x + h) - U(x - h)) / (2 * h)
    d2u = (U(x + h) - 2 * U(x) + U(x - h)) / h**2
    return U(x), du, d2u


def quartic_weighted_hessian_scan(lo=-5.0, hi=5.0, n=4010, ny=651):
    x = np.linspace(lo, hi, n)
    y = np.linspace(-5, 5, ny)
    X, Y = np.meshgrid(x, y, indexing="ij")
    return float(np.max(12 * X**2 * (1 + X**4 + Y**2 / 2) ** -0.5))


def gaussian_cov_vanloan(t, cov0):
    # Van Loan: exp([[A, 2D], [0, -A^T]] t) gives the noise Gramian
    A = np.array([[0.0, 1.0], [-1.0, -1.0]])
    D = np.diag([0.0, 1.0])
    blk = np.block([[A, 2 * D], [np.zeros((2, 2)), -A.T]])
    E = expm(blk * t)
    F = E[:2, :2]
    Q = E[:2, 2:] @ F.T
    return F @ cov0 @ F.T + Q


def gaussian_kl(cov):
    return 0.5 * (np.trace(cov) - 2 - math.log(np.linalg.det(cov)))


def main():
    print("I(1)", repr(rate_integral_quad(1.0)))
    print("I(50)", repr(rate_integral_quad(50.0)))
    i10 = rate_integral_quad(10.0)
    print("I(10)", repr(i10), "envelope(10)", repr(math.exp(-i10 / (1300 * 73))))
    for eta in (0.25, 0.5, 1.0):
        print(f"M2({eta})", repr(m2_quad(eta)))
    print("stretched-exp FD at 4", stretched_fd(4.0))
    print("quartic weighted Hessian dense scan", repr(quartic_weighted_hessian_scan()))
    cov0 = np.diag([0.25, 0.25])
    for t in (0.25, 0.5, 1.0, 2.0, 5.0):
        S = gaussian_cov_vanloan(t, cov0)
        print(f"t={t} cov", S.ravel().tolist(), "Ent", repr(gaussian_kl(S)))


if __name__ == "__main__":
    main()
