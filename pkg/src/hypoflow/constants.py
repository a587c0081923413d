"""Explicit constants of the entropic decay theorem and of the weighted
Poincare propagation bound.

The decay statement reads

    Ent(P_t f) <= exp(-kappa / (1 + 4 lam rho) * I(t)) * Ent(f),
    I(t) = int_0^t (1 - exp(-s))^2 ds,

with lam = (||H^(-2 eta) U''||_inf + 2)^2 and kappa = 1 / (1300 (eta + d)^4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy import integrate, special


class InvalidConstantError(ValueError):
    pass


@dataclass(frozen=True)
class Theorem1Constants:
    eta: float
    d: int
    hess_bound: float
    lam: float
    kappa: float
    epsilon: float
    rho: float

    @property
    def rate(self) -> float:
        """Coefficient multiplying I(t) in the envelope exponent."""
        return self.kappa / (1.0 + 4.0 * self.lam * self.rho)

    @property
    def g_rate(self) -> float:
        """Rate of the per-step bound on the twisted functional G."""
        return self.epsilon**2 / (1.0 + 4.0 * self.lam * self.rho)

    def schedule(self) -> "MultiplierSchedule":
        return MultiplierSchedule(self.eta, self.epsilon)

    def envelope(self, ent0, t):
        return decay_envelope(self, ent0, t)

    def to_dict(self, envelope_times=(), ent0=1.0) -> dict:
        out = {"eta": self.eta, "d": self.d, "hess_bound": self.hess_bound,
               "lambda": self.lam, "kappa": self.kappa, "epsilon": self.epsilon,
               "rho": self.rho}
        if len(envelope_times):
            out["envelope"] = [{"t": float(t), "value": float(decay_envelope(self, ent0, t))}
                               for t in envelope_times]
        return out


def theorem1_constants(eta: float, d: int, hess_bound: float, rho: float) -> Theorem1Constants:
    if eta < 0:
        raise ValueError("eta must be >= 0")
    if d < 1:
        raise ValueError("d must be >= 1")
    if hess_bound < 0 or not math.isfinite(hess_bound):
        raise ValueError("hess_bound must be finite and >= 0")
    if not rho > 0:
        raise InvalidConstantError(f"weighted log-Sobolev constant must be positive, got {rho}")
    lam = (hess_bound + 2.0) ** 2
    kappa = 1.0 / (1300.0 * (eta + d) ** 4)
    eps = 1.0 / (36.0 * (eta + d) ** 2)
    return Theorem1Constants(float(eta), int(d), float(hess_bound), lam, kappa, eps, float(rho))


def rate_integral(t):
    """I(t) = int_0^t (1 - e^-s)^2 ds in closed form (vectorised)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    # expm1 keeps the small-t cancellation under control
    e1 = -np.expm1(-t)
    e2 = -np.expm1(-2 * t)
    out = t - 2.0 * e1 + 0.5 * e2
    # series for tiny t: t^3/3 - t^4/4 + 7 t^5/60
    small = t < 1e-3
    if np.any(small):
        ts = t[small] if out.ndim else t
        ser = ts**3 / 3 - ts**4 / 4 + 7 * ts**5 / 60
        if out.ndim:
            out[small] = ser
        else:
            out = ser
    return float(out) if out.ndim == 0 else out


def decay_envelope(c: Theorem1Constants, ent0, t):
    if np.any(np.asarray(ent0) < 0):
        raise ValueError("ent0 must be >= 0")
    return ent0 * np.exp(-c.rate * rate_integral(t))


@dataclass(frozen=True)
class MultiplierSchedule:
    """Time and energy dependent multiplier matrix [[a, b], [b, c]]."""
    eta: float
    epsilon: float

    def alpha(self, t):
        return -np.expm1(-np.asarray(t, dtype=float))

    def coefficients(self, t, H):
        """Return (a, b, c) broadcast over t and H."""
        ea = self.epsilon * self.alpha(t) * np.asarray(H, dtype=float) ** (-self.eta)
        return ea**3, ea**2, 2.0 * ea


def multiplier_matrix(s: MultiplierSchedule, t: float, H: float) -> np.ndarray:
    if t < 0 or H < 1:
        raise ValueError("need t >= 0 and H >= 1")
    a, b, c = s.coefficients(t, H)
    return np.array([[float(a), float(b)], [float(b), float(c)]])


def quadratic_form(s: MultiplierSchedule, t, H, gx, gy):
    """(grad f)^T M grad f, elementwise."""
    a, b, c = s.coefficients(t, H)
    return a * gx * gx + 2 * b * gx * gy + c * gy * gy


def m2_quadrature(eta: float, d: int = 1, n_nodes: int = 200, check: bool = True) -> float:
    """M2 = int (1 + |y|^2/2)^(-2 eta) dN(0, I_d)(y).

    Radial Gauss-Laguerre rule in s = |y|^2/2 (Gauss-Hermite for d = 1),
    cross-checked by an independent rule to 1e-8.
    """
    if eta < 0:
        raise ValueError("eta must be >= 0")
    if eta == 0:
        return 1.0
    s, w = special.roots_genlaguerre(n_nodes, d / 2 - 1)
    val = float(np.sum(w * (1.0 + s) ** (-2 * eta)) / special.gamma(d / 2))
    if check:
        if d == 1:
            y = np.linspace(-40.0, 40.0, 16001)
            f = np.exp(-0.5 * y * y) * (1 + 0.5 * y * y) ** (-2 * eta) / math.sqrt(2 * math.pi)
            ref = float(integrate.trapezoid(f, y))
        else:
            ref = integrate.quad(lambda u: u ** (d / 2 - 1) * math.exp(-u) * (1 + u) ** (-2 * eta),
                                 0, np.inf, epsabs=1e-13, epsrel=1e-12)[0] / special.gamma(d / 2)
        if abs(ref - val) > 1e-8:
            raise ArithmeticError(f"M2 quadrature disagreement {abs(ref - val):.3e}")
    return val


def propagate_poincare_constant(c1: float, m2: float) -> float:
    """Bound on the phase-space weighted Poincare constant from the x-marginal one."""
    if not c1 > 0 or not 0 < m2 <= 1:
        raise ValueError("need C1 > 0 and M2 in (0, 1]")
    return max(2.0 + 4.0 / m2, 4.0 * c1 / m2)


def constants_dict(c: Theorem1Constants) -> dict:
    return asdict(c)
