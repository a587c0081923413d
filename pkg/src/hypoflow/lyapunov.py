"""Lyapunov certificates for L_eta, the growth scan theta(r), the weighted
integration-by-parts inequality and the spectral gap of -L_eta.

Candidates are W = exp(alpha U + beta y^2/2). W itself is never formed:
everything works with log W or with the closed-form ratio L_eta W / W.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.optimize import brentq
from scipy.sparse.linalg import lobpcg, splu, LinearOperator

from . import grid as G
from .potential import HamiltonianModel, DomainError, eval_potential, first_steep_radius

HEADROOM = 0.1


def worker_count(default=None) -> int:
    """Thread cap from HYPOFLOW_THREADS (falls back to the CPU count)."""
    env = os.environ.get("HYPOFLOW_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"HYPOFLOW_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return default or os.cpu_count() or 1


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class LyapunovCandidate:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ValueError("alpha and beta must lie in (0, 1)")

    def log_w(self, U, y):
        return self.alpha * np.asarray(U) + 0.5 * self.beta * np.asarray(y) ** 2

    def lower_bound(self, u_min=1.0) -> float:
        """w with W >= w > 0."""
        return math.exp(self.alpha * u_min)


@dataclass
class LyapunovCertificate:
    candidate: LyapunovCandidate
    lambda_drift: float
    b_drift: float
    margin: float
    region: tuple
    holds: bool
    edge_trend_ok: bool = True
    probe_margin: float = math.inf
    argmin: tuple = (0.0, 0.0)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"alpha": self.candidate.alpha, "beta": self.candidate.beta,
                "lambda_drift": self.lambda_drift, "b_drift": self.b_drift,
                "margin": self.margin, "holds": self.holds, "region": list(self.region),
                "edge_trend_ok": self.edge_trend_ok, "probe_margin": self.probe_margin,
                "warnings": list(self.warnings)}


@dataclass
class SearchResult:
    best: LyapunovCertificate | None
    feasible: bool
    tried: int
    reason: str = ""

    def to_dict(self) -> dict:
        out = {"feasible": self.feasible, "tried": self.tried, "reason": self.reason}
        if self.best is not None:
            out.update(self.best.to_dict())
        return out


@dataclass
class GrowthScan:
    radii: np.ndarray
    theta: np.ndarray
    C0: float
    c: float
    fit_ok: bool
    grad_floor: np.ndarray | None = None


# ---------------------------------------------------------------- ratio

def lyapunov_ratio(model: HamiltonianModel, cand: LyapunovCandidate, x, y):
    """Closed form of L_eta W / W for W = exp(alpha U + beta y^2/2), d = 1."""
    u, du, d2u = eval_potential(model.spec, x)
    y = np.asarray(y, dtype=float) if np.ndim(y) else float(y)
    h = u + 0.5 * y * y
    eta, a, b = model.eta, cand.alpha, cand.beta
    xpart = a * h ** (-2 * eta) * (d2u + (a - 2 * eta / h - 1.0) * du * du)
    return xpart + b * (1.0 - (1.0 - b) * y * y)


def discrete_ratio(grid: G.PhaseGrid, log_w):
    """Discrete L_eta W / W from log W, via exp of edge differences."""
    lw = np.asarray(log_w, dtype=float)
    out = np.zeros(grid.shape)
    cx = grid.mu_ex * grid.w_ex / grid.hx**2
    cy = grid.mu_ey / grid.hy**2
    dx = np.diff(lw, axis=0)
    dy = np.diff(lw, axis=1)
    out[:-1, :] += cx * np.expm1(dx)
    out[1:, :] += cx * np.expm1(-dx)
    out[:, :-1] += cy * np.expm1(dy)
    out[:, 1:] += cy * np.expm1(-dy)
    return out / grid.mu


# ---------------------------------------------------------------- certificates

def _scan_box(region, n_scan):
    rx, ry = region
    return np.meshgrid(np.linspace(-rx, rx, n_scan), np.linspace(-ry, ry, n_scan), indexing="ij")


def _probe_points(region, n_probe=81):
    # ring [R, 2R] outside the box: four edge bands
    rx, ry = region
    sx = np.linspace(rx, 2 * rx, n_probe)
    sy = np.linspace(ry, 2 * ry, n_probe)
    ax = np.linspace(-2 * rx, 2 * rx, 2 * n_probe)
    ay = np.linspace(-2 * ry, 2 * ry, 2 * n_probe)
    X1, Y1 = np.meshgrid(np.concatenate([sx, -sx]), ay, indexing="ij")
    X2, Y2 = np.meshgrid(ax, np.concatenate([sy, -sy]), indexing="ij")
    return np.concatenate([X1.ravel(), X2.ravel()]), np.concatenate([Y1.ravel(), Y2.ravel()])


def _probe(model, cand, lam, b, region):
    try:
        px, py = _probe_points(region)
        r = lyapunov_ratio(model, cand, px, py)
        h = model.H(px, py)
        return float(np.min(-lam * h + b - r))
    except DomainError:
        return -math.inf


def verify_certificate(model: HamiltonianModel, cand: LyapunovCandidate, lambda_drift: float,
                       b_drift: float, region=(5.0, 5.0), n_scan=201) -> LyapunovCertificate:
    """margin = min over the scan box of (-lam H + b) - L_eta W / W.

    ``holds`` is margin >= 0. The edge trend is probed on the ring between
    the box and twice its size using the closed form; a negative probe margin
    sets ``edge_trend_ok`` to False and adds a warning that the verdict is
    inconclusive outside the scanned region.
    """
    if not lambda_drift > 0:
        raise ValueError("lambda_drift must be > 0")
    X, Y = _scan_box(region, n_scan)
    r = lyapunov_ratio(model, cand, X, Y)
    slack = -lambda_drift * model.H(X, Y) + b_drift - r
    k = np.unravel_index(int(np.argmin(slack)), slack.shape)
    margin = float(slack[k])
    probe = _probe(model, cand, lambda_drift, b_drift, region)
    warnings = []
    if probe < 0:
        warnings.append("drift inequality fails just outside the scanned region; "
                        "verdict inconclusive beyond the box")
    return LyapunovCertificate(cand, float(lambda_drift), float(b_drift), margin,
                               tuple(map(float, region)), margin >= 0, probe >= 0, probe,
                               (float(X[k]), float(Y[k])), warnings)


def _box_edge(region, n):
    rx, ry = region
    sx, sy = np.linspace(-rx, rx, n), np.linspace(-ry, ry, n)
    ex = np.concatenate([np.full(n, rx), np.full(n, -rx), sx, sx])
    ey = np.concatenate([sy, sy, np.full(n, ry), np.full(n, -ry)])
    return ex, ey


def fit_candidate(model: HamiltonianModel, cand: LyapunovCandidate, region=(5.0, 5.0),
                  n_scan=201) -> LyapunovCertificate | None:
    """Certificate with lam = half the minimum of -ratio/H on the box edge and
    b = max(ratio + lam H, 0) over the box plus ``HEADROOM * lam``.

    Returns None when the edge slope is not positive.
    """
    ex, ey = _box_edge(region, n_scan)
    slope = -lyapunov_ratio(model, cand, ex, ey) / model.H(ex, ey)
    lam = 0.5 * float(np.min(slope))
    if not lam > 0:
        return None
    X, Y = _scan_box(region, n_scan)
    top = float(np.max(lyapunov_ratio(model, cand, X, Y) + lam * model.H(X, Y)))
    b = max(top, 0.0) + HEADROOM * lam
    return verify_certificate(model, cand, lam, b, region, n_scan)


def search_candidate(model: HamiltonianModel, alphas=None, betas=None, region=(5.0, 5.0),
                     n_scan=201, workers=None) -> SearchResult:
    """Best certificate over an (alpha, beta) grid.

    With the fitting rule the margin equals HEADROOM * lam, so the best
    candidate is the one with the steepest edge drift. Candidates whose
    probe ring fails are not counted as feasible.
    """
    alphas = np.linspace(0.05, 0.95, 19) if alphas is None else np.asarray(alphas, dtype=float)
    betas = np.linspace(0.05, 0.95, 19) if betas is None else np.asarray(betas, dtype=float)
    cands = [LyapunovCandidate(float(a), float(b)) for a in alphas for b in betas]
    n = min(worker_count(workers), len(cands))
    with ThreadPoolExecutor(max_workers=n) as pool:
        certs = list(pool.map(lambda c: fit_candidate(model, c, region, n_scan), cands))
    ok = [c for c in certs if c is not None and c.holds and c.edge_trend_ok]
    if not ok:
        n_slope = sum(c is None for c in certs)
        return SearchResult(None, False, len(cands),
                            f"no feasible candidate: {n_slope}/{len(cands)} have non-positive "
                            f"edge drift, the rest fail the scan or the probe ring")
    # ties broken by candidate order so the result is deterministic
    best = max(ok, key=lambda c: c.margin)
    return SearchResult(best, True, len(cands))


# ---------------------------------------------------------------- growth conditions

def corollary3_check(model: HamiltonianModel, R=None, x_max=None, n_scan=2001,
                     slope_tol=0.1) -> dict:
    """kappa = max U''/U'^2 and c = min U'^2/U^(2 eta + 1) over R <= |x| <= x_max.

    holds needs kappa < 1, c > 0 and a stable edge trend: the log-log slope
    of U'^2/U^(2 eta + 1) over the last decade of the scan must be above
    -slope_tol (a decaying ratio means c -> 0 on larger regions).
    """
    spec = model.spec
    R = first_steep_radius(spec) if R is None else float(R)
    if not R > 0:
        raise ValueError("R must be > 0")
    x_max = 10 * R if x_max is None else float(x_max)
    s = np.geomspace(R, x_max, n_scan)
    xs = np.concatenate([s, -s])
    u, du, d2u = eval_potential(spec, xs)
    g2 = du * du
    grad_floor = float(np.min(np.abs(du)))
    if grad_floor == 0.0:
        return {"kappa_found": math.inf, "c_found": 0.0, "holds": False, "R": R,
                "x_max": x_max, "grad_floor": 0.0, "edge_slope": math.nan,
                "reason": "U' vanishes outside R (condition 1 fails)"}
    kappa = float(np.max(d2u / g2))
    cval = g2 / u ** (2 * model.eta + 1)
    c_found = float(np.min(cval))
    # slope of log c(x) vs log x over the last decade on each side
    tail = s >= x_max / 10
    slopes = []
    for side in (cval[:n_scan], cval[n_scan:]):
        slopes.append(float(np.polyfit(np.log(s[tail]), np.log(side[tail]), 1)[0]))
    edge_slope = min(slopes)
    holds = kappa < 1 and c_found > 0 and edge_slope > -slope_tol
    reason = "" if holds else ("kappa >= 1" if kappa >= 1 else
                               "growth ratio decays toward the edge (c -> 0)")
    return {"kappa_found": kappa, "c_found": c_found, "holds": bool(holds), "R": R,
            "x_max": x_max, "grad_floor": grad_floor, "edge_slope": edge_slope,
            "reason": reason}


def _sublevel_edge(spec, r, sign, x_hi=1e3):
    f = lambda t: eval_potential(spec, sign * t)[0] - r
    hi = 1.0
    while f(hi) < 0:
        hi *= 2
        if hi > x_hi:
            raise DomainError(f"no crossing of U = {r} below |x| = {x_hi}")
    return sign * brentq(f, 0.0, hi, xtol=1e-12)


def theta_scan(model: HamiltonianModel, radii, n_shell=2001) -> GrowthScan:
    """theta(r) = max(1, max |U''|) on the energy shell H = r, with an
    exponential envelope c e^(C0 r).

    Since the Hessian of H is diag(U'', 1) and the shell projects onto the
    sublevel set {U <= r}, theta only needs a scan in x. C0 comes from a
    least-squares fit of log theta on the first half of the radii (clipped
    at 0), c is the tightest envelope constant on that half, and fitOk asks
    the whole scan, including the held-out half, to stay under the envelope.
    """
    r = np.asarray(radii, dtype=float)
    if r.ndim != 1 or len(r) < 2 or np.any(np.diff(r) <= 0):
        raise ValueError("radii must be increasing with at least two entries")
    spec = model.spec
    theta = np.empty_like(r)
    floor = np.empty_like(r)
    for k, rk in enumerate(r):
        lo, hi = _sublevel_edge(spec, rk, -1), _sublevel_edge(spec, rk, 1)
        xs = np.linspace(lo, hi, n_shell)
        u, du, d2u = eval_potential(spec, xs)
        theta[k] = max(1.0, float(np.max(np.abs(d2u))))
        y = np.sqrt(np.maximum(2 * (rk - u), 0.0))
        floor[k] = float(np.min(np.hypot(du, y)))
    half = max(2, len(r) // 2)
    lt = np.log(theta)
    C0 = max(0.0, float(np.polyfit(r[:half], lt[:half], 1)[0]))
    logc = float(np.max(lt[:half] - C0 * r[:half]))
    fit_ok = bool(np.all(lt <= logc + C0 * r + 1e-12))
    return GrowthScan(r, theta, C0, math.exp(logc), fit_ok, floor)


# ---------------------------------------------------------------- lemma

def lemma_ipp_check(grid: G.PhaseGrid, g, log_w) -> dict:
    """lhs = int -(L_eta W / W) g^2 dmu against rhs = weighted Dirichlet form of g."""
    g = np.asarray(g, dtype=float)
    lhs = -grid.integrate(discrete_ratio(grid, log_w) * g * g)
    rhs = G.dirichlet_form(grid, g)
    return {"lhs": lhs, "rhs": rhs, "ok": bool(lhs <= rhs + 1e-6 * (1 + abs(rhs)))}


# ---------------------------------------------------------------- spectral gap

def stiffness_matrix(grid: G.PhaseGrid, weighted=True):
    """Sparse K with v^T K v = cell-scaled Dirichlet form, and mass vector m."""
    nx, ny = grid.shape
    idx = np.arange(nx * ny).reshape(nx, ny)
    cx = (grid.mu_ex * (grid.w_ex if weighted else 1.0)) * grid.cell / grid.hx**2
    cy = grid.mu_ey * grid.cell / grid.hy**2
    i = np.concatenate([idx[:-1, :].ravel(), idx[:, :-1].ravel()])
    j = np.concatenate([idx[1:, :].ravel(), idx[:, 1:].ravel()])
    c = np.concatenate([cx.ravel(), cy.ravel()])
    return _laplacian(i, j, c, nx * ny), (grid.mu * grid.cell).ravel()


def _laplacian(i, j, c, n):
    off = sparse.coo_matrix((-c, (i, j)), shape=(n, n))
    diag = np.bincount(i, c, n) + np.bincount(j, c, n)
    return (off + off.T + sparse.diags(diag)).tocsc()


@dataclass
class GapResult:
    gap: float
    field: np.ndarray
    iterations: int
    residual: float

    def to_dict(self, eta) -> dict:
        return {"eta": eta, "gap": self.gap, "iterations": self.iterations,
                "residual": self.residual}


def _generalized_gap(K, m, tol=1e-11, maxiter=500, seed=0) -> GapResult:
    n = K.shape[0]
    M = sparse.diags(m).tocsc()
    shift = 1e-3 * float(K.diagonal().max() / m.max())
    lu = splu((K + shift * M).tocsc())
    prec = LinearOperator((n, n), matvec=lu.solve, dtype=float)
    Yc = np.ones((n, 1))
    rng = np.random.default_rng(seed)
    X0 = rng.standard_normal((n, 2))
    with warnings.catch_warnings():
        # lobpcg warns when it stops a hair above tol; convergence is judged below
        warnings.simplefilter("ignore", UserWarning)
        lam, vec, hist = lobpcg(K, X0, B=M, M=prec, Y=Yc, tol=tol, maxiter=maxiter,
                                largest=False, retResidualNormsHistory=True)
    k = int(np.argmin(lam))
    v = vec[:, k]
    Kv, Mv = K @ v, m * v
    res = float(np.linalg.norm(Kv - lam[k] * Mv) / max(np.linalg.norm(Mv), 1e-300))
    rel = res / max(abs(lam[k]), 1e-300)
    if not np.isfinite(lam[k]) or rel > 1e-5:
        raise SolverError(f"eigensolver did not converge after {len(hist)} iterations "
                          f"(relative residual {rel:.2e})")
    v = v / math.sqrt(float(np.sum(m * v * v)))
    return GapResult(float(lam[k]), v, len(hist), res)


def spectral_gap(grid: G.PhaseGrid, tol=1e-11, maxiter=500) -> GapResult:
    """Smallest eigenvalue of -L_eta on mu-mean-zero fields.

    Solves K v = lam M v (M = diag(mu * cell)) by LOBPCG with the constants
    as a hard constraint, preconditioned by a sparse LU of K + shift M.
    """
    K, m = stiffness_matrix(grid)
    res = _generalized_gap(K, m, tol, maxiter)
    res.field = res.field.reshape(grid.shape)
    return res


def dense_gap(grid: G.PhaseGrid) -> float:
    """Same eigenvalue by a dense generalized eigensolve (small grids only)."""
    K, m = stiffness_matrix(grid)
    if K.shape[0] > 4096:
        raise ValueError("dense_gap is meant for small grids")
    w = eigh(K.toarray(), np.diag(m), eigvals_only=True, subset_by_index=[0, 1])
    return float(w[1])


def marginal_gap(model: HamiltonianModel, Rx=8.0, nx=400, tol=1e-11) -> GapResult:
    """Gap of the 1-D operator f'' - (1 + 2 eta / U) U' f', reversible for
    nu ~ U^(-2 eta) e^(-U); 1/gap is the x-marginal Poincare constant C1."""
    h = 2 * Rx / nx
    x = -Rx + h * (np.arange(nx) + 0.5)
    xe = -Rx + h * np.arange(1, nx)
    def logw(t):
        u = eval_potential(model.spec, t)[0]
        return -u - 2 * model.eta * np.log(u)

    l0 = float(np.max(logw(x)))
    nu = np.exp(logw(x) - l0)
    z = nu.sum() * h
    m = nu * h / z
    c = np.exp(logw(xe) - l0) / z / h
    K = _laplacian(np.arange(nx - 1), np.arange(1, nx), c, nx)
    return _generalized_gap(K, m, tol)
