"""Accelerated proximal-gradient solver for the regularized conditional likelihood.

The problem is

    minimize   f(alpha, Theta, L) + lam*|Theta|_1 + gamma*|L|_*
    subject to (alpha + L_k, Theta) valid for the family, k = 1..n

where f is :func:`~lvgm.objective.gaussian_smooth` or
:func:`~lvgm.objective.pseudo_smooth`. One joint step is taken on all three
blocks; the nonsmooth part is separable across blocks so its prox is closed
form (soft-thresholding on Theta, singular value thresholding on L).

The L block is stepped in a metric weighted by 1/n: each column of L only
enters through one sample, so its curvature is O(1/n) while that of Theta is
O(1). Without the weighting a common step size would leave L nearly frozen.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Tuple

import numpy as np
from scipy import linalg

from .data import as_array
from .errors import DomainError, InfeasibleStartError, NotPositiveDefiniteError
from .families import FamilySpec, ModelParams, cholesky, family, rho, rho_and_prime
from .prox import PenaltyConfig, project_domain, project_exponential, prox_l1_theta, svt

log = logging.getLogger(__name__)

Edge = Tuple[int, int]


@dataclass
class SolveOptions:
    max_iter: int = 5000
    tol_rel_obj: float = 1e-8
    tol_residual: float = 1e-5
    backtrack_factor: float = 0.5
    init_step: float = 1.0
    acceleration: bool = True
    seed: int = 0
    center: bool = True
    random_init: bool = False
    support_tol: float = 1e-8
    rank_tol: float = 1e-6
    window: int = 10
    divergence_norm: float = 1e8

    def __post_init__(self):
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not 0 < self.tol_rel_obj < 1:
            raise ValueError("tol_rel_obj must lie in (0, 1)")
        if self.max_iter <= 0 or self.init_step <= 0 or self.tol_residual <= 0:
            raise ValueError("max_iter, init_step and tol_residual must be positive")


@dataclass
class StructureConstraints:
    """Hard structural restrictions for refits and held-out evaluation.

    ``support``: allowed off-diagonal entries of Theta (edge list or boolean
    matrix); everything else is pinned to zero.
    ``colspace``: d x k orthonormal basis; every column of L must lie in its
    span. A d x 0 basis forces L = 0.
    """

    support: Optional[object] = None
    colspace: Optional[np.ndarray] = None
    fix_alpha: Optional[np.ndarray] = None
    fix_theta: Optional[np.ndarray] = None


@dataclass
class FitResult:
    params: ModelParams
    objective_trace: List[float]
    support: FrozenSet[Edge]
    rank: int
    iterations: int
    converged: bool
    family: FamilySpec
    penalty: PenaltyConfig
    status: str = "converged"
    residual: float = float("nan")
    center: Optional[np.ndarray] = None
    L_basis: Optional[np.ndarray] = None
    L_coords: Optional[np.ndarray] = None
    constraints: Optional[StructureConstraints] = field(default=None, repr=False)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    @property
    def theta(self) -> np.ndarray:
        return self.params.theta

    @property
    def L(self) -> np.ndarray:
        return self.params.L


# ---------------------------------------------------------------------------
# edge-set helpers


def support_of(theta, tol: float = 1e-8) -> FrozenSet[Edge]:
    theta = np.asarray(theta)
    i, j = np.nonzero(np.triu(np.abs(theta) > tol, k=1))
    return frozenset(zip(i.tolist(), j.tolist()))


def edges_to_mask(edges, d: int) -> np.ndarray:
    if isinstance(edges, np.ndarray) and edges.dtype == bool:
        mask = edges | edges.T
    else:
        mask = np.zeros((d, d), dtype=bool)
        for i, j in edges:
            mask[i, j] = mask[j, i] = True
    np.fill_diagonal(mask, False)
    return mask


def column_space(L, rank_tol: float = 1e-6) -> np.ndarray:
    """Orthonormal basis of the numerical column space of ``L``."""
    if L is None or L.size == 0:
        return np.zeros((0 if L is None else L.shape[0], 0))
    U, s, _ = np.linalg.svd(L, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        return np.zeros((L.shape[0], 0))
    return U[:, s > rank_tol * s[0]]


def numerical_rank(L, rank_tol: float = 1e-6) -> int:
    return column_space(L, rank_tol).shape[1]


# ---------------------------------------------------------------------------
# smooth part


class _Smooth:
    """Cached evaluator of the smooth objective on fixed data."""

    def __init__(self, X: np.ndarray, fam: FamilySpec, n_norm: Optional[float] = None):
        self.X = X
        self.fam = fam
        self.d, self.m = X.shape
        self.n = float(self.m if n_norm is None else n_norm)
        self.gram = X @ X.T
        self.rowsum = X.sum(axis=1)

    def _gauss_parts(self, theta, L):
        d = self.d
        chol = cholesky(theta)
        cholesky(theta - self.fam.strict_margin * np.eye(d))
        tinv_L = linalg.cho_solve((chol, True), L, check_finite=False)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        val = (
            0.5 * np.sum(L * tinv_L) / self.n
            - 0.5 * logdet
            - np.sum(L * self.X) / self.n
            + 0.5 * np.sum(theta * self.gram) / self.n
        )
        return chol, tinv_L, float(val)

    def _pseudo_U(self, alpha, theta, L):
        diag = np.diag(theta)
        U = alpha[:, None] + L - theta @ self.X
        if np.any(diag):
            U += diag[:, None] * self.X
        return U

    def value(self, alpha, theta, L) -> float:
        if self.fam.is_gaussian:
            return self._gauss_parts(theta, L)[2]
        U = self._pseudo_U(alpha, theta, L)
        r_val = rho(self.fam, U)
        lin = alpha @ self.rowsum + np.sum(L * self.X)
        return float((np.sum(r_val) - lin + np.sum(theta * self.gram)) / self.n)

    def full(self, alpha, theta, L):
        n = self.n
        if self.fam.is_gaussian:
            chol, tinv_L, val = self._gauss_parts(theta, L)
            tinv = linalg.cho_solve((chol, True), np.eye(self.d), check_finite=False)
            g_t = -0.5 * (tinv_L @ tinv_L.T) / n - 0.5 * tinv + 0.5 * self.gram / n
            g_t = 0.5 * (g_t + g_t.T)
            return val, np.zeros(self.d), g_t, (tinv_L - self.X) / n
        U = self._pseudo_U(alpha, theta, L)
        r_val, R = rho_and_prime(self.fam, U)
        lin = alpha @ self.rowsum + np.sum(L * self.X)
        val = float((np.sum(r_val) - lin + np.sum(theta * self.gram)) / n)
        resid = R - self.X
        M = (self.gram - R @ self.X.T) / n
        M[np.diag_indices(self.d)] = np.diag(self.gram) / n
        return val, resid.sum(axis=1) / n, 0.5 * (M + M.T), resid / n


# ---------------------------------------------------------------------------
# the engine


class _Problem:
    def __init__(self, X, fam, cfg, cons, n_norm=None):
        self.fam = fam
        self.cfg = cfg
        self.sm = _Smooth(X, fam, n_norm)
        d = self.sm.d
        self.d = d
        self.n = self.sm.n
        cons = cons or StructureConstraints()
        self.cons = cons
        self.mask = None
        if cons.support is not None:
            self.mask = edges_to_mask(cons.support, d)
            if fam.is_gaussian:
                np.fill_diagonal(self.mask, True)
        self.C = None if cons.colspace is None else np.asarray(cons.colspace, dtype=float).reshape(d, -1)
        self.fix_alpha = None
        if fam.is_gaussian:
            self.fix_alpha = np.zeros(d)
        if cons.fix_alpha is not None:
            self.fix_alpha = np.asarray(cons.fix_alpha, dtype=float).copy()
        self.fix_theta = None if cons.fix_theta is None else np.asarray(cons.fix_theta, dtype=float).copy()
        self.latent_free = self.C is None or self.C.shape[1] > 0

    def penalty(self, theta, nuc):
        a = np.abs(theta)
        l1 = a.sum() if self.cfg.penalize_diagonal else a.sum() - np.trace(a)
        return self.cfg.lam * l1 + self.cfg.gamma * nuc

    def nuclear(self, L):
        if not self.latent_free or self.cfg.gamma == 0:
            return 0.0
        A = L if self.C is None else self.C.T @ L
        return float(np.linalg.svd(A, compute_uv=False).sum())

    def prox(self, alpha, theta, L, t):
        """Prox step at step size ``t`` (L block uses ``n*t``)."""
        L_in = L
        if self.fix_alpha is not None:
            alpha = self.fix_alpha
        if self.fix_theta is not None:
            theta = self.fix_theta
        else:
            theta = prox_l1_theta(theta, t * self.cfg.lam, self.fam, self.cfg)
            if self.mask is not None:
                theta = np.where(self.mask, theta, 0.0)
        tl = self.n * t * self.cfg.gamma
        if not self.latent_free:
            L = np.zeros_like(L)
            nuc = 0.0
        else:
            L, nuc = self._latent_prox(L, tl)
        if self.fam.kind == "exponential":
            alpha, L, nuc = self._exponential_prox(alpha, L, nuc, L_in, tl)
        return alpha, theta, L, nuc

    def _latent_prox(self, L, tl):
        if self.C is None:
            L, s = svt(L, tl, return_singular_values=True)
            return L, float(s.sum())
        M, s = svt(self.C.T @ L, tl, return_singular_values=True)
        return self.C @ M, float(s.sum())

    def _exponential_prox(self, alpha, L, nuc, L_in, tl, max_iter=1000):
        """Joint prox of the nuclear norm and the domain ``alpha + L <= -margin``.

        When thresholding alone already lands in the domain it is the answer.
        Otherwise proximal Dykstra alternates the two operators; the last
        operator applied is the projection, so the output is always feasible.
        """
        m = self.fam.strict_margin
        fixed = self.fix_alpha is not None
        if np.all(alpha[:, None] + L <= -m):
            return alpha, L, nuc
        if not self.latent_free:
            if not fixed:
                alpha, _ = project_domain(self.fam, alpha, None)
            return alpha, L, 0.0
        if tl == 0 and self.C is None:
            a, L = project_exponential(alpha, L_in, self.n, m, fixed)
            return a, L, self.nuclear(L)
        xa, xl = alpha.copy(), L_in.copy()
        pa, pl = np.zeros_like(xa), np.zeros_like(xl)
        qa, ql = np.zeros_like(xa), np.zeros_like(xl)
        for _ in range(max_iter):
            ya, yl = xa + pa, self._latent_prox(xl + pl, tl)[0]
            pa, pl = xa + pa - ya, xl + pl - yl
            na, nl = project_exponential(ya + qa, yl + ql, self.n, m, fixed)
            qa, ql = ya + qa - na, yl + ql - nl
            change = _weighted_sq(self, na - xa, 0.0, nl - xl)
            size = _weighted_sq(self, na, 0.0, nl)
            xa, xl = na, nl
            if change <= 1e-24 * (1.0 + size):
                break
        return xa, xl, self.nuclear(xl)

    def check_point(self, alpha, theta, L):
        fam = self.fam
        if fam.is_gaussian:
            return
        if fam.nonnegative_interactions and np.any(theta < 0):
            raise DomainError("negative interaction")
        if fam.kind == "exponential" and np.any(alpha[:, None] + L > -fam.strict_margin):
            raise DomainError("alpha + L must stay below -margin")


def _random_start(prob: _Problem, rng: np.random.Generator):
    d, m = prob.d, prob.sm.m
    fam = prob.fam
    A = rng.normal(scale=0.1, size=(d, d))
    A = 0.5 * (A + A.T)
    if fam.is_gaussian:
        theta = np.diag(rng.uniform(0.5, 2.0, size=d)) + A
        w = np.linalg.eigvalsh(theta)
        if w[0] < 0.1:
            theta += (0.1 - w[0]) * np.eye(d)
    else:
        theta = np.abs(A) if fam.nonnegative_interactions else A
        np.fill_diagonal(theta, 0.0)
    if prob.mask is not None:
        theta = np.where(prob.mask, theta, 0.0)
        if fam.is_gaussian:
            w = np.linalg.eigvalsh(theta)
            if w[0] < 0.1:
                theta += (0.1 - w[0]) * np.eye(d)
    alpha = rng.normal(scale=0.2, size=d)
    if fam.kind == "exponential":
        alpha = -1.0 - np.abs(alpha)
    L = rng.normal(scale=0.1, size=(d, m))
    if fam.kind == "exponential":
        L = -np.abs(L)
    if prob.C is not None:
        L = prob.C @ (prob.C.T @ L)
    return alpha, theta, L


def _default_start(prob: _Problem):
    d, m = prob.d, prob.sm.m
    fam = prob.fam
    if fam.is_gaussian:
        var = np.diag(prob.sm.gram) / prob.n
        var = np.where(var > 1e-12, var, 1.0)
        theta = np.diag(1.0 / var)
        alpha = np.zeros(d)
    else:
        theta = np.zeros((d, d))
        alpha = -np.ones(d) if fam.kind == "exponential" else np.zeros(d)
    return alpha, theta, np.zeros((d, m))


def _weighted_sq(prob, da, dt, dl):
    return float(da @ da + np.sum(dt * dt) + np.sum(dl * dl) / prob.n)


def _solve(prob: _Problem, opts: SolveOptions, start) -> dict:
    sm = prob.sm
    beta = opts.backtrack_factor
    alpha, theta, L = start
    if prob.fix_alpha is not None:
        alpha = prob.fix_alpha.copy()
    if prob.fix_theta is not None:
        theta = prob.fix_theta.copy()
    if not prob.latent_free:
        L = np.zeros_like(L)
    try:
        prob.check_point(alpha, theta, L)
        f_x = sm.value(alpha, theta, L)
    except (DomainError, NotPositiveDefiniteError) as exc:
        raise InfeasibleStartError(f"starting point is infeasible: {exc}") from None
    F_x = f_x + prob.penalty(theta, prob.nuclear(L))
    x = (alpha, theta, L)
    trace = [F_x]
    y = x
    f_y, *g_y = sm.full(*y)
    t = opts.init_step
    mom = 1.0
    status = "max_iter"
    residual = float("nan")
    it = 0
    stalls = 0
    for it in range(1, opts.max_iter + 1):
        # backtracking line search from y
        while True:
            za = y[0] - t * g_y[0]
            zt = y[1] - t * g_y[1]
            zl = y[2] - (prob.n * t) * g_y[2]
            a_p, t_p, l_p, nuc = prob.prox(za, zt, zl, t)
            try:
                prob.check_point(a_p, t_p, l_p)
                f_p = sm.value(a_p, t_p, l_p)
            except (DomainError, NotPositiveDefiniteError):
                f_p = math.inf
            if math.isfinite(f_p):
                da, dt, dl = a_p - y[0], t_p - y[1], l_p - y[2]
                lin = float(g_y[0] @ da + np.sum(g_y[1] * dt) + np.sum(g_y[2] * dl))
                quad = _weighted_sq(prob, da, dt, dl) / (2.0 * t)
                if f_p <= f_y + lin + quad + 1e-12 * max(1.0, abs(f_p)):
                    break
            t *= beta
            if t < 1e-30:
                break
        if t < 1e-30:
            status = "stalled"
            break
        F_p = f_p + prob.penalty(t_p, nuc)
        restarted = y is not x
        if F_p > F_x:
            if restarted:
                # momentum overshoot: restart from the last accepted iterate
                y = x
                mom = 1.0
                f_y, *g_y = sm.full(*y)
                continue
            stalls += 1
            if stalls > 3:
                # no further decrease is representable; certify or give up
                pnorm = math.sqrt(_weighted_sq(prob, x[0], x[1], x[2]))
                residual = _residual(prob, x, t, sm)
                ok = residual <= opts.tol_residual * (1.0 + pnorm)
                status = "converged" if ok else "stalled"
                break
            t *= beta
            continue
        stalls = 0
        x_prev = x
        x = (a_p, t_p, l_p)
        F_x = F_p
        trace.append(F_x)
        pnorm = math.sqrt(_weighted_sq(prob, x[0], x[1], x[2]))
        if pnorm > opts.divergence_norm:
            status = "diverged"
            break
        # momentum
        if opts.acceleration:
            mom_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * mom * mom))
            w = (mom - 1.0) / mom_new
            mom = mom_new
            y = tuple(xi + w * (xi - pi) for xi, pi in zip(x, x_prev))
            try:
                prob.check_point(*y)
                f_y, *g_y = sm.full(*y)
            except (DomainError, NotPositiveDefiniteError):
                y = x
                mom = 1.0
                f_y, *g_y = sm.full(*y)
        else:
            y = x
            f_y, *g_y = sm.full(*y)
        # stopping test: objective plateau over the window, then a certified residual
        if len(trace) > opts.window:
            old = trace[-1 - opts.window]
            if abs(old - F_x) <= opts.tol_rel_obj * max(1.0, abs(F_x)):
                residual = _residual(prob, x, t, sm)
                if residual <= opts.tol_residual * (1.0 + pnorm):
                    status = "converged"
                    break
        t = t / math.sqrt(beta)
    return dict(x=x, trace=trace, iterations=it, status=status, residual=residual)


def _residual(prob: _Problem, x, t, sm) -> float:
    """Norm of the prox-gradient map at ``x`` (L block in the dual weighted norm)."""
    _, ga, gt, gl = sm.full(*x)
    a_p, t_p, l_p, _ = prob.prox(x[0] - t * ga, x[1] - t * gt, x[2] - prob.n * t * gl, t)
    ra = (x[0] - a_p) / t
    rt = (x[1] - t_p) / t
    rl = (x[2] - l_p) / (prob.n * t)
    return math.sqrt(float(ra @ ra + np.sum(rt * rt) + prob.n * np.sum(rl * rl)))


# ---------------------------------------------------------------------------
# public API


def _prepare(X, fam: FamilySpec, opts: SolveOptions):
    X = as_array(X)
    fam.check_data(X)
    center = None
    if fam.is_gaussian:
        center = X.mean(axis=1) if opts.center else np.zeros(X.shape[0])
        X = X - center[:, None]
    return X, center


def fit(
    X,
    fam,
    cfg: Optional[PenaltyConfig] = None,
    opts: Optional[SolveOptions] = None,
    cons: Optional[StructureConstraints] = None,
    init: Optional[ModelParams] = None,
    n_norm: Optional[float] = None,
) -> FitResult:
    """Minimize the regularized conditional (pseudo-)likelihood.

    Gaussian data are column-centered (unless ``opts.center`` is off) and
    alpha is held at zero. ``init`` warm-starts from earlier parameters; an L
    of the wrong shape is ignored. ``n_norm`` overrides the normalizing sample
    count (used by the reduced Gaussian problem).
    """
    fam = family(fam)
    cfg = cfg or PenaltyConfig()
    opts = opts or SolveOptions()
    Xc, center = _prepare(X, fam, opts)
    prob = _Problem(Xc, fam, cfg, cons, n_norm)
    if init is not None:
        L0 = init.L if init.L is not None and init.L.shape == Xc.shape else np.zeros_like(Xc)
        start = (np.asarray(init.alpha, float).copy(), np.asarray(init.theta, float).copy(), L0.copy())
        if prob.mask is not None:
            start = (start[0], np.where(prob.mask | np.eye(prob.d, dtype=bool), start[1], 0.0), start[2])
        if prob.C is not None:
            start = (start[0], start[1], prob.C @ (prob.C.T @ start[2]))
        if fam.kind == "exponential" and prob.fix_alpha is None:
            a, _ = project_domain(fam, start[0], start[2])
            start = (a, start[1], start[2])
    elif opts.random_init:
        start = _random_start(prob, np.random.default_rng(opts.seed))
    else:
        start = _default_start(prob)
    out = _solve(prob, opts, start)
    return _finish(out, prob, fam, cfg, opts, cons, center)


def _finish(out, prob, fam, cfg, opts, cons, center) -> FitResult:
    alpha, theta, L = out["x"]
    theta = 0.5 * (theta + theta.T)
    basis = column_space(L, opts.rank_tol)
    coords = basis.T @ L
    L = basis @ coords
    status = out["status"]
    if status != "converged":
        log.warning("fit did not converge (%s) after %d iterations", status, out["iterations"])
    return FitResult(
        params=ModelParams(alpha.copy(), theta, L),
        objective_trace=out["trace"],
        support=support_of(theta, opts.support_tol),
        rank=basis.shape[1],
        iterations=out["iterations"],
        converged=status == "converged",
        family=fam,
        penalty=cfg,
        status=status,
        residual=out["residual"],
        center=center,
        L_basis=basis,
        L_coords=coords,
        constraints=cons,
    )


def objective_value(X, fam, params: ModelParams, cfg: Optional[PenaltyConfig] = None,
                    center=None, n_norm: Optional[float] = None) -> float:
    """Composite objective (smooth part plus penalties) at ``params``."""
    fam = family(fam)
    cfg = cfg or PenaltyConfig()
    X = as_array(X)
    if fam.is_gaussian and center is not None:
        X = X - np.asarray(center)[:, None]
    sm = _Smooth(X, fam, n_norm)
    L = params.L if params.L is not None else np.zeros_like(X)
    alpha = np.zeros(X.shape[0]) if fam.is_gaussian else params.alpha
    val = sm.value(alpha, params.theta, L)
    a = np.abs(params.theta)
    l1 = a.sum() if cfg.penalize_diagonal else a.sum() - np.trace(a)
    nuc = np.linalg.svd(L, compute_uv=False).sum() if cfg.gamma and L.size else 0.0
    return float(val + cfg.lam * l1 + cfg.gamma * nuc)


def lambda_max(X, fam, cfg: Optional[PenaltyConfig] = None, center: bool = True) -> float:
    """Smallest lam for which the no-latent fit has an empty off-diagonal support.

    At the null model (diagonal Gaussian fit, or Theta = 0 with alpha at its
    unpenalized optimum) the off-diagonal smooth gradient reduces to half the
    sample covariance (Gaussian) or the full sample covariance (pseudo-
    likelihood). For the nonnegative families only negative gradient entries
    can activate an edge.
    """
    fam = family(fam)
    X = as_array(X)
    d, n = X.shape
    if fam.is_gaussian:
        Xc = X - X.mean(axis=1, keepdims=True) if center else X
        G = 0.5 * (Xc @ Xc.T) / n
    else:
        mean = X.mean(axis=1)
        G = X @ X.T / n - np.outer(mean, mean)
    off = G[~np.eye(d, dtype=bool)]
    if off.size == 0:
        return 0.0
    if fam.nonnegative_interactions:
        return float(max(0.0, np.max(-off)))
    return float(np.max(np.abs(off)))


def kkt_check(result: FitResult, X, n_norm: Optional[float] = None,
              cons: Optional[StructureConstraints] = None) -> dict:
    """Subgradient optimality spot-checks at a fitted solution.

    Returns the worst excess over the penalty for zero off-diagonal Theta
    entries, for the complement of L's row/column spaces, and the alpha
    gradient norm. With ``cons`` the checks only cover the free directions:
    entries outside the allowed support and gradient components outside the
    allowed column space are ignored (a d x 0 column space makes the latent
    check vacuous).
    """
    fam = result.family
    cfg = result.penalty
    X = as_array(X)
    if fam.is_gaussian and result.center is not None:
        X = X - result.center[:, None]
    sm = _Smooth(X, fam, n_norm)
    p = result.params
    L = p.L if p.L is not None else np.zeros_like(X)
    _, ga, gt, gl = sm.full(p.alpha, p.theta, L)
    d = p.theta.shape[0]
    off = ~np.eye(d, dtype=bool)
    zero = off & (np.abs(p.theta) <= 0)
    C = None
    if cons is not None:
        if cons.support is not None:
            zero &= edges_to_mask(cons.support, d)
        if cons.fix_theta is not None:
            zero[:] = False
        if cons.colspace is not None:
            C = np.asarray(cons.colspace, dtype=float).reshape(d, -1)
    if fam.nonnegative_interactions:
        theta_excess = np.max(-gt[zero] - cfg.lam, initial=-np.inf)
    else:
        theta_excess = np.max(np.abs(gt[zero]) - cfg.lam, initial=-np.inf)
    nz = off & (p.theta != 0)
    theta_active = np.max(np.abs(gt[nz] + cfg.lam * np.sign(p.theta[nz])), initial=0.0)
    U = result.L_basis if result.L_basis is not None else column_space(L)
    if C is not None:
        if C.shape[1] == 0:
            gl = np.zeros_like(gl)
        else:
            # work in coordinates of the allowed column space
            gl, L, U = C.T @ gl, C.T @ L, C.T @ U
    G = gl - U @ (U.T @ gl)
    if U.shape[1]:
        _, s, Vt = np.linalg.svd(L, full_matrices=False)
        V = Vt[: U.shape[1]].T
        G = G - (G @ V) @ V.T
    spec = np.linalg.norm(G, 2) if G.size else 0.0
    return dict(
        theta_zero_excess=float(theta_excess),
        theta_active_error=float(theta_active),
        latent_excess=float(spec - cfg.gamma),
        alpha_grad=float(np.linalg.norm(ga)) if not fam.is_gaussian else 0.0,
    )
