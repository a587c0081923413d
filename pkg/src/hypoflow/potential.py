"""Confinement potentials U(x), the Hamiltonian H = U + y^2/2 and the
Hessian-weight analysis that picks the exponent eta.

Everything here is evaluated in one space dimension. ``dimension`` on a
:class:`PotentialSpec` is carried as metadata for the constants module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

FAMILIES = ("quadratic", "even-monomial", "stretched-exp", "polynomial")

# smoothing of |x| for the stretched exponential
_SIGMA = 1e-12


class DomainError(ValueError):
    """Potential evaluation left the admissible range (non-finite or U < 1)."""


class IncompatibleEtaError(ValueError):
    """No exponent eta makes the growth and Hessian conditions compatible."""


@dataclass(frozen=True)
class PotentialSpec:
    family: str = "quadratic"
    l: int = 4
    a: float = 1.0
    b: float = 0.5
    coefficients: tuple = ()
    offset: float | None = None
    dimension: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown potential family {self.family!r}")
        if self.family == "even-monomial" and (self.l < 2 or self.l % 2):
            raise ValueError("even-monomial needs an even l >= 2")
        if self.family == "stretched-exp" and (self.a <= 0 or self.b <= 0):
            raise ValueError("stretched-exp needs a > 0 and b > 0")
        if self.family == "polynomial":
            c = tuple(float(v) for v in self.coefficients)
            # trailing zeros would hide the true degree
            while c and c[-1] == 0.0:
                c = c[:-1]
            if len(c) < 3 or (len(c) - 1) % 2 or c[-1] <= 0:
                raise ValueError(
                    "polynomial needs an even degree >= 2 with positive leading "
                    "coefficient (exp(-U) must be integrable)")
            object.__setattr__(self, "coefficients", c)
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.offset is None:
            object.__setattr__(self, "offset", 0.0 if self.family == "stretched-exp" else 1.0)

    @classmethod
    def quadratic(cls, offset=1.0):
        return cls("quadratic", offset=offset)

    @classmethod
    def monomial(cls, l, offset=1.0):
        return cls("even-monomial", l=l, offset=offset)

    @classmethod
    def stretched_exp(cls, a, b, offset=0.0):
        return cls("stretched-exp", a=a, b=b, offset=offset)

    @classmethod
    def polynomial(cls, coefficients: Sequence[float], offset=0.0):
        """``coefficients[k]`` multiplies x**k."""
        return cls("polynomial", coefficients=tuple(coefficients), offset=offset)

    def describe(self) -> str:
        if self.family == "quadratic":
            return f"U = {self.offset:g} + x^2/2"
        if self.family == "even-monomial":
            return f"U = {self.offset:g} + x^{self.l}"
        if self.family == "stretched-exp":
            return f"U = {self.offset:g} + exp({self.a:g}|x|^{self.b:g})"
        return f"U = {self.offset:g} + poly{self.coefficients}"


def _raw(spec: PotentialSpec, x):
    """U - offset and its first two derivatives."""
    if spec.family == "quadratic":
        return 0.5 * x * x, x, np.ones_like(x)
    if spec.family == "even-monomial":
        l = spec.l
        return x**l, l * x ** (l - 1), l * (l - 1) * x ** (l - 2)
    if spec.family == "stretched-exp":
        a, b = spec.a, spec.b
        s2 = x * x + _SIGMA
        s = np.sqrt(s2)
        sb = s**b
        e = np.exp(a * sb)
        # g(x) = a s^b, s = sqrt(x^2 + sigma)
        g1 = a * b * s ** (b - 2) * x
        g2 = a * b * (s ** (b - 2) + (b - 2) * s ** (b - 4) * x * x)
        return e, e * g1, e * (g2 + g1 * g1)
    c = np.asarray(spec.coefficients)
    p = np.polynomial.Polynomial(c)
    return p(x), p.deriv(1)(x), p.deriv(2)(x)


def eval_potential(spec: PotentialSpec, x):
    """Return ``(U, dU, d2U)`` at ``x`` (scalar or array).

    Raises DomainError for non-finite values or U < 1.
    """
    xa = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        u, du, d2u = _raw(spec, xa)
        u = u + spec.offset
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(du)) and np.all(np.isfinite(d2u))):
        raise DomainError(f"{spec.describe()} is not finite on the requested points")
    if np.any(u < 1.0 - 1e-12):
        raise DomainError(f"{spec.describe()} drops below 1 (min {float(np.min(u)):.6g})")
    if np.ndim(x) == 0:
        return float(u), float(du), float(d2u)
    return u, du, d2u


@dataclass(frozen=True)
class HamiltonianModel:
    spec: PotentialSpec
    eta: float = 0.0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be >= 0")

    def U(self, x):
        return eval_potential(self.spec, x)[0]

    def H(self, x, y):
        return eval_potential(self.spec, x)[0] + 0.5 * np.asarray(y) ** 2

    def phi1(self, x):
        return self.U(x) ** (-2 * self.eta)

    def phi2(self, y):
        return (1.0 + 0.5 * np.asarray(y, dtype=float) ** 2) ** (-2 * self.eta)


def eval_hamiltonian(model: HamiltonianModel, x, y):
    """Return ``(H, gradH, weight)`` with ``gradH = (dU, y)`` and weight H^(-2 eta)."""
    u, du, _ = eval_potential(model.spec, x)
    y = np.asarray(y, dtype=float) if np.ndim(y) else float(y)
    h = u + 0.5 * y * y
    grad = (du, y)
    weight = h ** (-2.0 * model.eta)
    return h, grad, weight


@dataclass
class HessianBound:
    """Scan estimate of sup H^(-2 eta) |U''| and a divergence diagnosis."""
    value: float
    diverging: bool
    edge_exponent: float
    argmax: float
    domain: tuple = field(default=(-5.0, 5.0))


def _weighted_hessian_x(model: HamiltonianModel, x):
    # for eta >= 0 the sup over y is attained at y = 0, where H = U
    u, _, d2u = eval_potential(model.spec, x)
    return np.abs(d2u) * u ** (-2.0 * model.eta)


def hessian_weight_bound(model: HamiltonianModel, domain=(-5.0, 5.0), n_scan=401,
                         n_y=65, growth_tol=0.25) -> HessianBound:
    """Estimate ``sup |H^(-2 eta) U''|`` over ``domain`` x [-Ry, Ry].

    A (x, y) scan is refined around the best node by a bounded scalar search,
    so the value is non-decreasing when the domain grows or the scan is
    refined. ``diverging`` is set when the local log-log growth exponent of
    the edge value, measured between the domain edge and twice that
    distance, exceeds ``growth_tol``.
    """
    if n_scan < 2:
        raise ValueError("n_scan must be >= 2")
    lo, hi = map(float, domain)
    xs = np.linspace(lo, hi, n_scan)
    ry = max(abs(lo), abs(hi))
    ys = np.linspace(-ry, ry, n_y if n_y % 2 else n_y + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    _, _, d2u = eval_potential(model.spec, X)
    _, _, w = eval_hamiltonian(model, X, Y)
    vals = w * np.abs(d2u)
    k = int(np.argmax(np.max(vals, axis=1)))
    best_x, best = xs[k], float(np.max(vals))
    # polish in x (the y-maximum sits on y = 0)
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, n_scan - 1)]
    if b > a:
        res = minimize_scalar(lambda t: -float(_weighted_hessian_x(model, t)),
                              bounds=(a, b), method="bounded",
                              options={"xatol": 1e-10 * max(1.0, abs(best_x))})
        if -res.fun > best:
            best, best_x = float(-res.fun), float(res.x)

    edge = max(abs(lo), abs(hi))
    try:
        v1 = float(np.max(_weighted_hessian_x(model, np.array([edge, -edge]))))
        v2 = float(np.max(_weighted_hessian_x(model, np.array([2 * edge, -2 * edge]))))
        if v1 > 0 and v2 > 0:
            expo = float(np.log(v2 / v1) / np.log(2.0))
        else:
            expo = 0.0 if v2 <= v1 else np.inf
    except DomainError:
        expo = np.inf
    return HessianBound(value=best, diverging=bool(expo > growth_tol),
                        edge_exponent=expo, argmax=best_x, domain=(lo, hi))


def recommended_eta(spec: PotentialSpec) -> float:
    """Smallest eta for which U^(-2 eta) U'' stays bounded for the family."""
    if spec.family == "quadratic":
        return 0.0
    if spec.family == "even-monomial":
        return 0.5 - 1.0 / spec.l
    if spec.family == "stretched-exp":
        if spec.b >= 1:
            raise IncompatibleEtaError(
                "stretched-exp with b >= 1: the growth condition needs eta <= 1/2 "
                "while the Hessian bound needs eta > 1/2")
        return 0.5
    raise ValueError(f"no eta rule for family {spec.family!r}")


def first_steep_radius(spec: PotentialSpec, factor=10.0, x_max=100.0) -> float:
    """Smallest x >= 1 with U'(x) >= factor * U'(1); default "outside a compact" radius."""
    ref = abs(eval_potential(spec, 1.0)[1])
    for x in np.linspace(1.0, x_max, 2001):
        try:
            du = abs(eval_potential(spec, x)[1])
        except DomainError:
            return float(x)
        if du >= factor * ref:
            return float(x)
    return float(x_max)
