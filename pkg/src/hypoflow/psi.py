"""Admissible convex kernels Psi (Psi(1) = 0, 1/Psi'' positive concave).

``variance``  Psi(u) = (u - 1)^2
``entropy``   Psi(u) = u ln u + 1 - u
``sqrt-log``  Psi'' (u) = sqrt(ln(e + u)) / u, normalised by Psi(1) = Psi'(1) = 0
"""

from __future__ import annotations

import enum
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline


class PsiKind(str, enum.Enum):
    VARIANCE = "variance"
    ENTROPY = "entropy"
    SQRT_LOG = "sqrt-log"


class PositivityError(ValueError):
    """A kernel that needs u > 0 met a non-positive value."""


def _kind(kind) -> PsiKind:
    return kind if isinstance(kind, PsiKind) else PsiKind(kind)


def _sqrtlog_psi2(u):
    return np.sqrt(np.log(np.e + u)) / u


@lru_cache(maxsize=1)
def _sqrtlog_tables():
    # In s = ln u:  P1(s) = int_1^u psi(w) dw = int_0^s sqrt(ln(e + e^r)) dr
    #               P2(s) = int_1^u w psi(w) dw = int_0^s e^r sqrt(ln(e + e^r)) dr
    s = np.linspace(-40.0, 40.0, 64001)
    g = np.sqrt(np.log(np.e + np.exp(s)))
    p1 = CubicSpline(s, g).antiderivative()
    p2 = CubicSpline(s, np.exp(s) * g).antiderivative()
    return p1, p2, p1(0.0), p2(0.0)


def _sqrtlog_Psi(u):
    shape = np.shape(u)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    p1, p2, c1, c2 = _sqrtlog_tables()
    s = np.log(u)
    out = u * (p1(s) - c1) - (p2(s) - c2)
    # Taylor branch near u = 1, where the two table terms cancel
    z = u - 1.0
    near = np.abs(z) < 1e-3
    if np.any(near):
        k0 = np.sqrt(np.log(np.e + 1.0))
        # derivatives of psi(u) = sqrt(ln(e+u))/u at u = 1
        d1 = 1.0 / (2 * k0 * (np.e + 1)) - k0
        d2 = (-1.0 / (4 * k0**3 * (np.e + 1) ** 2) - 1.0 / (2 * k0 * (np.e + 1) ** 2)
              - 2 * (1.0 / (2 * k0 * (np.e + 1))) + 2 * k0)
        zn = z[near]
        out[near] = k0 * zn**2 / 2 + d1 * zn**3 / 6 + d2 * zn**4 / 24
    return out.reshape(shape)


def Psi(u, kind=PsiKind.ENTROPY):
    kind = _kind(kind)
    u = np.asarray(u, dtype=float)
    if kind is PsiKind.VARIANCE:
        return (u - 1.0) ** 2
    if np.any(u <= 0):
        raise PositivityError(f"{kind.value} kernel needs strictly positive values")
    if kind is PsiKind.ENTROPY:
        return u * np.log(u) + 1.0 - u
    return _sqrtlog_Psi(u)


def psi(u, kind=PsiKind.ENTROPY):
    """Second derivative Psi''."""
    kind = _kind(kind)
    u = np.asarray(u, dtype=float)
    if kind is PsiKind.VARIANCE:
        return np.full_like(u, 2.0)
    if np.any(u <= 0):
        raise PositivityError(f"{kind.value} kernel needs strictly positive values")
    if kind is PsiKind.ENTROPY:
        return 1.0 / u
    return _sqrtlog_psi2(u)
