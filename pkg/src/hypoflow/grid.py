"""Truncated (x, y) phase-space grid for d = 1 and the discrete generators.

Nodes sit at cell centres of the box [-Rx, Rx] x [-Ry, Ry]; quadrature is the
midpoint rule on nodes against the discrete Gibbs weights mu = e^(-H)/Z.

All operators are written in flux form, which makes the discrete identities
exact rather than approximate:

* symmetric parts (L_s, L_eta) are ``(1/mu) div(mu_edge * w_edge * grad)``
  with zero flux through the box boundary, so they are self-adjoint in
  L^2(mu) and kill constants;
* the transport part L_a uses edge coefficients built from a discrete stream
  function (mu itself, evaluated at cell corners and set to zero on the box
  boundary). Its discrete divergence vanishes identically, so the centred
  form is antisymmetric in L^2(mu) and the upwind form keeps f = 1 fixed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .potential import HamiltonianModel, eval_potential
from .psi import PsiKind, Psi, psi, PositivityError

TAIL_TOL = 1e-10
OPERATORS = ("L", "Lstar", "Ls", "La", "Leta")


class TruncationError(ValueError):
    """Box too small for the Gibbs tail criterion (or too large for its weights)."""


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    model: HamiltonianModel
    Rx: float
    Ry: float
    nx: int
    ny: int
    hx: float
    hy: float
    x: np.ndarray
    y: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    U: np.ndarray
    dU: np.ndarray
    d2U: np.ndarray
    H: np.ndarray
    weight: np.ndarray
    mu: np.ndarray
    Z: float
    mu_ex: np.ndarray   # x-edges, shape (nx-1, ny)
    w_ex: np.ndarray
    mu_ey: np.ndarray   # y-edges, shape (nx, ny-1)
    A: np.ndarray       # transport coefficient on x-edges
    B: np.ndarray       # transport coefficient on y-edges
    tail_mass: float

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def cell(self) -> float:
        return self.hx * self.hy

    def integrate(self, g) -> float:
        """int g dmu."""
        return float(np.sum(self.mu * g) * self.cell)

    def inner(self, f, g) -> float:
        return self.integrate(f * g)

    def sublevel(self, r) -> np.ndarray:
        """Node mask of A_r = {H <= r}."""
        return self.H <= r

    def interior(self, margin=3) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[margin:self.nx - margin, margin:self.ny - margin] = True
        return m

    def fresh(self, value=1.0) -> np.ndarray:
        return np.full(self.shape, float(value))


def _tail_mass_x(model: HamiltonianModel, Rx: float) -> float:
    spec = model.spec
    u0 = eval_potential(spec, 0.0)[0]

    def dens(t):
        try:
            return math.exp(-(eval_potential(spec, t)[0] - u0))
        except Exception:
            return 0.0

    total = integrate.quad(dens, -np.inf, np.inf, limit=400)[0]
    tail = 2 * integrate.quad(dens, Rx, np.inf, limit=400)[0] if _even(spec) else (
        integrate.quad(dens, Rx, np.inf, limit=400)[0] + integrate.quad(dens, -np.inf, -Rx, limit=400)[0])
    return tail / total


def _even(spec) -> bool:
    if spec.family != "polynomial":
        return True
    return all(c == 0 for c in spec.coefficients[1::2])


def tail_mass(model: HamiltonianModel, Rx: float, Ry: float) -> float:
    """Fraction of e^(-H) outside the box (union bound over the two marginals)."""
    ty = float(special.erfc(Ry / math.sqrt(2.0)))
    return _tail_mass_x(model, Rx) + ty


def suggest_box(model: HamiltonianModel, tol=TAIL_TOL) -> tuple:
    Ry = math.sqrt(2.0) * float(special.erfcinv(tol / 2))
    Rx = 0.5
    while _tail_mass_x(model, Rx) >= tol / 2 and Rx < 1e3:
        Rx *= 1.05
    return (round(Rx + 0.05, 1), round(Ry + 0.05, 1))


def build_grid(model: HamiltonianModel, Rx=8.0, Ry=8.0, nx=128, ny=128,
               tail_tol=TAIL_TOL) -> PhaseGrid:
    if min(Rx, Ry) <= 0 or min(nx, ny) < 4:
        raise ValueError("need positive ranges and at least 4 nodes per axis")
    tm = tail_mass(model, Rx, Ry)
    if tm >= tail_tol:
        raise TruncationError(
            f"Gibbs tail mass outside the box is {tm:.2e} >= {tail_tol:.0e}; "
            f"try Rx, Ry = {suggest_box(model, tail_tol)}")
    hx, hy = 2 * Rx / nx, 2 * Ry / ny
    x = -Rx + hx * (np.arange(nx) + 0.5)
    y = -Ry + hy * (np.arange(ny) + 0.5)
    X, Y = np.meshgrid(x, y, indexing="ij")
    U, dU, d2U = eval_potential(model.spec, X)
    H = U + 0.5 * Y**2
    # corner coordinates (cell vertices)
    xc = -Rx + hx * np.arange(nx + 1)
    yc = -Ry + hy * np.arange(ny + 1)
    Ux = eval_potential(model.spec, x)[0]
    Uc = eval_potential(model.spec, xc)[0]

    # shift by min H to keep exp() in range; Z is the discrete normaliser
    h0 = float(H.min())
    g = np.exp(-(H - h0))
    zs = float(g.sum() * hx * hy)
    Z = zs * math.exp(-h0)
    mu = g / zs
    if not np.all(mu > 0):
        raise TruncationError("Gibbs weight underflows inside the box; shrink Rx")

    def gibbs(u, yy):
        return np.exp(-(u[:, None] + 0.5 * yy[None, :] ** 2 - h0)) / zs

    mu_ex = gibbs(Uc[1:nx], y)
    mu_ey = gibbs(Ux, yc[1:ny])
    H_ex = Uc[1:nx, None] + 0.5 * y[None, :] ** 2
    w_ex = H_ex ** (-2.0 * model.eta)
    P = gibbs(Uc, yc)
    P[0, :] = P[-1, :] = 0.0
    P[:, 0] = P[:, -1] = 0.0
    A = (P[1:nx, 1:ny + 1] - P[1:nx, 0:ny]) / hy
    B = -(P[1:nx + 1, 1:ny] - P[0:nx, 1:ny]) / hx
    return PhaseGrid(model=model, Rx=float(Rx), Ry=float(Ry), nx=int(nx), ny=int(ny),
                     hx=hx, hy=hy, x=x, y=y, X=X, Y=Y, U=U, dU=dU, d2U=d2U, H=H,
                     weight=H ** (-2.0 * model.eta), mu=mu, Z=Z, mu_ex=mu_ex,
                     w_ex=w_ex, mu_ey=mu_ey, A=A, B=B, tail_mass=tm)


# ---------------------------------------------------------------- stencils

def _div_x(flux, nx, hx):
    out = np.zeros((nx,) + flux.shape[1:])
    out[:-1] += flux
    out[1:] -= flux
    return out / hx


def _div_y(flux, ny, hy):
    out = np.zeros(flux.shape[:1] + (ny,))
    out[:, :-1] += flux
    out[:, 1:] -= flux
    return out / hy


def _sym_y(grid: PhaseGrid, g):
    flux = grid.mu_ey * np.diff(g, axis=1) / grid.hy
    return _div_y(flux, grid.ny, grid.hy)


def _sym_x(grid: PhaseGrid, g, weighted=True):
    c = grid.mu_ex * grid.w_ex if weighted else grid.mu_ex
    flux = c * np.diff(g, axis=0) / grid.hx
    return _div_x(flux, grid.nx, grid.hx)


def _transport_centered(grid: PhaseGrid, g):
    fx = grid.A * 0.5 * (g[1:, :] + g[:-1, :])
    fy = grid.B * 0.5 * (g[:, 1:] + g[:, :-1])
    return _div_x(fx, grid.nx, grid.hx) + _div_y(fy, grid.ny, grid.hy)


def _mc_limiter(a, b):
    # monotonized-central slope: zero at extrema, else min(2|a|, 2|b|, |a+b|/2)
    mag = np.minimum(np.minimum(2 * np.abs(a), 2 * np.abs(b)), 0.5 * np.abs(a + b))
    return np.where(a * b > 0, np.sign(a) * mag, 0.0)


def _limited_slopes(g, axis):
    d = np.diff(g, axis=axis)
    s = np.zeros_like(g)
    if axis == 0:
        s[1:-1, :] = _mc_limiter(d[:-1, :], d[1:, :])
    else:
        s[:, 1:-1] = _mc_limiter(d[:, :-1], d[:, 1:])
    return s


def _transport_upwind(grid: PhaseGrid, g, order=2):
    # mass moves with velocity -A/mu along x and -B/mu along y
    if order == 1:
        lo_x, hi_x = g[:-1, :], g[1:, :]
        lo_y, hi_y = g[:, :-1], g[:, 1:]
    else:
        sx = _limited_slopes(g, 0)
        sy = _limited_slopes(g, 1)
        lo_x, hi_x = g[:-1, :] + 0.5 * sx[:-1, :], g[1:, :] - 0.5 * sx[1:, :]
        lo_y, hi_y = g[:, :-1] + 0.5 * sy[:, :-1], g[:, 1:] - 0.5 * sy[:, 1:]
    fx = grid.A * np.where(grid.A < 0, lo_x, hi_x)
    fy = grid.B * np.where(grid.B < 0, lo_y, hi_y)
    return _div_x(fx, grid.nx, grid.hx) + _div_y(fy, grid.ny, grid.hy)


def apply_generator(grid: PhaseGrid, field, which="L"):
    """Apply one of L, L*, L_s, L_a, L_eta to a node field.

    L = -y d/dx + (U' - y) d/dy + d^2/dy^2 acts on densities relative to mu;
    L* is the generator of the Langevin process; L_s = d^2/dy^2 - y d/dy;
    L_a = L - L_s; L_eta is the weighted symmetric operator whose Dirichlet
    form is int (H^(-2 eta) |d_x f|^2 + |d_y f|^2) dmu.
    """
    g = np.asarray(field, dtype=float)
    if which not in OPERATORS:
        raise ValueError(f"unknown operator {which!r}")
    if which == "Ls":
        return _sym_y(grid, g) / grid.mu
    if which == "La":
        return _transport_centered(grid, g) / grid.mu
    if which == "Leta":
        return (_sym_x(grid, g) + _sym_y(grid, g)) / grid.mu
    sign = 1.0 if which == "L" else -1.0
    return (_sym_y(grid, g) + sign * _transport_centered(grid, g)) / grid.mu


def transport_upwind(grid: PhaseGrid, field, order=2):
    """Upwind discretisation of L_a used by the time stepper.

    ``order=1`` is donor-cell; ``order=2`` adds MC-limited linear
    reconstruction (MUSCL), which removes most of the O(h) numerical
    diffusion while keeping f = 1 stationary.
    """
    return _transport_upwind(grid, np.asarray(field, dtype=float), order) / grid.mu


def transport_rates(grid: PhaseGrid):
    """Per-node outflow rate of the upwind transport operator."""
    out = np.zeros(grid.shape)
    ax = np.abs(grid.A) / grid.hx
    by = np.abs(grid.B) / grid.hy
    # upwind node i loses |A|/hx through an edge whose velocity leaves it
    out[:-1, :] += np.where(grid.A < 0, ax, 0.0)
    out[1:, :] += np.where(grid.A > 0, ax, 0.0)
    out[:, :-1] += np.where(grid.B < 0, by, 0.0)
    out[:, 1:] += np.where(grid.B > 0, by, 0.0)
    return out / grid.mu


def diffusion_rates(grid: PhaseGrid):
    """Diagonal magnitude of the discrete L_s at each node."""
    s = np.zeros(grid.shape)
    s[:, :-1] += grid.mu_ey
    s[:, 1:] += grid.mu_ey
    return s / (grid.mu * grid.hy**2)


# ---------------------------------------------------------------- derivatives

def d_dx(grid: PhaseGrid, g):
    return np.gradient(g, grid.hx, axis=0)


def d_dy(grid: PhaseGrid, g):
    return np.gradient(g, grid.hy, axis=1)


# ---------------------------------------------------------------- functionals

def functional(grid: PhaseGrid, field, kind=PsiKind.ENTROPY) -> float:
    """int Psi(f) dmu - Psi(int f dmu): Ent_mu(f), Var_mu(f) or the sqrt-log analogue."""
    f = np.asarray(field, dtype=float)
    kind = PsiKind(kind)
    if kind is not PsiKind.VARIANCE and np.any(f <= 0):
        raise PositivityError(f"{kind.value} functional met {int(np.sum(f <= 0))} non-positive nodes")
    m = grid.integrate(f)
    if kind is PsiKind.ENTROPY:
        val = grid.integrate(f * np.log(f)) - m * math.log(m)
    elif kind is PsiKind.VARIANCE:
        val = grid.integrate((f - m) ** 2)
    else:
        val = grid.integrate(Psi(f, kind)) - float(Psi(m, kind))
    return max(val, 0.0)


def dirichlet_form(grid: PhaseGrid, field, weighted=True, psi_weighted=None) -> float:
    """Edge form of int (w |d_x f|^2 + psi(f)|d_y f|^2 ...) dmu.

    ``weighted`` selects w = H^(-2 eta) (else 1). With ``psi_weighted`` set,
    every edge term carries psi(f) at the edge midpoint value. Without it the
    result equals -<f, L_eta f>_mu exactly.
    """
    f = np.asarray(field, dtype=float)
    cx = grid.mu_ex * (grid.w_ex if weighted else 1.0)
    ex = cx * (np.diff(f, axis=0) / grid.hx) ** 2
    ey = grid.mu_ey * (np.diff(f, axis=1) / grid.hy) ** 2
    if psi_weighted is not None:
        ex = ex * psi(0.5 * (f[1:, :] + f[:-1, :]), psi_weighted)
        ey = ey * psi(0.5 * (f[:, 1:] + f[:, :-1]), psi_weighted)
    return float((ex.sum() + ey.sum()) * grid.cell)


def moments(grid: PhaseGrid, field) -> dict:
    """First and second moments of the law f dmu."""
    f = np.asarray(field, dtype=float)
    m = grid.integrate(f)
    mx = grid.integrate(f * grid.X) / m
    my = grid.integrate(f * grid.Y) / m
    vx = grid.integrate(f * (grid.X - mx) ** 2) / m
    vy = grid.integrate(f * (grid.Y - my) ** 2) / m
    cxy = grid.integrate(f * (grid.X - mx) * (grid.Y - my)) / m
    return {"mean_x": mx, "mean_y": my, "var_x": vx, "var_y": vy, "cov_xy": cxy, "mass": m}


# ---------------------------------------------------------------- identities

def commutator_residual(grid: PhaseGrid, test_field, margin=3) -> dict:
    """Max-norm residuals of [L, d_y] = d_x + d_y and [L, d_x] = -U'' d_y on interior nodes."""
    f = np.asarray(test_field, dtype=float)
    L = lambda g: apply_generator(grid, g, "L")
    fx, fy = d_dx(grid, f), d_dy(grid, f)
    Lf = L(f)
    res1 = L(fy) - d_dy(grid, Lf) - fx - fy
    res2 = L(fx) - d_dx(grid, Lf) + grid.d2U * fy
    m = grid.interior(margin)
    return {"r1": float(np.max(np.abs(res1[m]))), "r2": float(np.max(np.abs(res2[m])))}


def ls_power_closed_form(grid: PhaseGrid, eta: float, d: int = 1):
    """L_s(H^-eta) = eta(|y|^2 - d) H^(-eta-1) + eta(eta+1)|y|^2 H^(-eta-2)."""
    H, y2 = grid.H, grid.Y**2
    return eta * (y2 - d) * H ** (-eta - 1) + eta * (eta + 1) * y2 * H ** (-eta - 2)


def ls_identity_residual(grid: PhaseGrid, eta: float, margin=3) -> float:
    disc = apply_generator(grid, grid.H ** (-eta), "Ls")
    m = grid.interior(margin)
    return float(np.max(np.abs(disc - ls_power_closed_form(grid, eta))[m]))


def bump(t, center=0.0, radius=1.0):
    """C-infinity bump exp(-1/(1 - s^2)) supported on |t - center| < radius."""
    s = (np.asarray(t, dtype=float) - center) / radius
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


# ---------------------------------------------------------------- field I/O

_HEADER = struct.Struct("<4siidd4x")
MAGIC = b"HYPF"


def write_field_csv(path, grid: PhaseGrid, field):
    data = np.column_stack([grid.X.ravel(), grid.Y.ravel(), np.asarray(field).ravel()])
    np.savetxt(path, data, delimiter=",", header="x,y,value", comments="", fmt="%.17g")


def read_field_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return data[:, 0], data[:, 1], data[:, 2]


def write_field_binary(path, grid: PhaseGrid, field):
    """32-byte header (magic, nx, ny, Rx, Ry) then little-endian float64, row-major."""
    vals = np.ascontiguousarray(np.asarray(field, dtype="<f8").reshape(grid.shape))
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, grid.nx, grid.ny, grid.Rx, grid.Ry))
        fh.write(vals.tobytes(order="C"))


def read_field_binary(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, nx, ny, Rx, Ry = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if vals.size != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} values, found {vals.size}")
    return {"nx": nx, "ny": ny, "Rx": Rx, "Ry": Ry, "values": vals.reshape(nx, ny).copy()}
