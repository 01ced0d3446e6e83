"""Sample-size-free reformulation of the Gaussian estimator.

The Gaussian objective depends on the data only through XX' and through the
pairing of L with X, and both are unchanged when X and L are rotated on the
right by a common orthogonal matrix. Rotating onto the singular vectors of X
turns the d x n problem into one over (Theta, H) with H a d x d matrix:

    1/2 tr(H'Theta^-1 H) - 1/2 logdet Theta - tr(H'S) + 1/2 tr(Theta Sigma)
        + lam |Theta|_1 + gamma sqrt(n) |H|_*

with Sigma = XX'/n and S its PSD square root. A full-size solution is
recovered as L = sqrt(n) H U V' from the thin SVD X = U D V'.

This is exactly the full objective evaluated on the d-column surrogate data
``sqrt(n) S`` with the normalizing sample count kept at n and L = sqrt(n) H,
so the regular solver is reused unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .data import as_array
from .families import ModelParams, family
from .prox import PenaltyConfig
from .solver import FitResult, SolveOptions, StructureConstraints, column_space, fit, support_of


@dataclass
class ReducedInstance:
    sigma: np.ndarray
    sqrt_sigma: np.ndarray
    U: np.ndarray
    V: np.ndarray
    n: int
    center: Optional[np.ndarray] = None

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    def surrogate(self) -> np.ndarray:
        """d x d data matrix with the same Gram matrix as sqrt(n) * X."""
        return np.sqrt(self.n) * self.sqrt_sigma


def psd_sqrt(S: np.ndarray) -> np.ndarray:
    w, Q = np.linalg.eigh(0.5 * (S + S.T))
    w = np.maximum(w, 0.0)
    R = (Q * np.sqrt(w)) @ Q.T
    return 0.5 * (R + R.T)


def reduce(X, center: bool = False) -> ReducedInstance:
    """Sufficient statistics of (already centered) data for the reduced problem.

    With ``center`` set the rows are centered first and the mean is kept on
    the instance.
    """
    X = as_array(X)
    mean = None
    if center:
        mean = X.mean(axis=1)
        X = X - mean[:, None]
    d, n = X.shape
    sigma = X @ X.T / n
    sigma = 0.5 * (sigma + sigma.T)
    U, _, Vt = np.linalg.svd(X, full_matrices=False)
    return ReducedInstance(sigma, psd_sqrt(sigma), U, Vt.T, n, mean)


def fit_reduced(inst: ReducedInstance, cfg: Optional[PenaltyConfig] = None,
                opts: Optional[SolveOptions] = None,
                cons: Optional[StructureConstraints] = None) -> Tuple[FitResult, np.ndarray]:
    """Solve the reduced problem; returns the raw fit and H.

    The caller's ``gamma`` applies to the nuclear norm of the full-size L,
    which is ``sqrt(n)`` times that of H. The raw fit's L is ``sqrt(n) H``.
    """
    cfg = cfg or PenaltyConfig()
    opts = opts or SolveOptions()
    opts = SolveOptions(**{**opts.__dict__, "center": False})
    res = fit(inst.surrogate(), family("gaussian"), cfg, opts, cons, n_norm=inst.n)
    H = res.params.L / np.sqrt(inst.n)
    return res, H


def reconstruct_L(H, inst: ReducedInstance) -> np.ndarray:
    """Full-size latent matrix ``sqrt(n) H U V'``."""
    H = np.asarray(H, dtype=float)
    return np.sqrt(inst.n) * (H @ inst.U) @ inst.V.T


def reduced_objective(theta, H, inst: ReducedInstance, cfg: Optional[PenaltyConfig] = None) -> float:
    """Reduced objective value, computed directly from its definition."""
    cfg = cfg or PenaltyConfig()
    theta = np.asarray(theta, dtype=float)
    H = np.asarray(H, dtype=float)
    c = np.linalg.cholesky(theta)
    tinv_H = np.linalg.solve(theta, H)
    val = (
        0.5 * np.sum(H * tinv_H)
        - np.sum(np.log(np.diag(c)))
        - np.sum(H * inst.sqrt_sigma)
        + 0.5 * np.sum(theta * inst.sigma)
    )
    a = np.abs(theta)
    l1 = a.sum() if cfg.penalize_diagonal else a.sum() - np.trace(a)
    nuc = np.linalg.svd(H, compute_uv=False).sum() if H.size else 0.0
    return float(val + cfg.lam * l1 + cfg.gamma * np.sqrt(inst.n) * nuc)


def fit_gaussian_reduced(X, cfg: Optional[PenaltyConfig] = None,
                         opts: Optional[SolveOptions] = None) -> FitResult:
    """Gaussian fit through the reduced problem, returned in full-size form.

    Data are centered (unless ``opts.center`` is off), matching :func:`fit`.
    The objective trace is that of the reduced problem, which shares the
    optimal value of the full one.
    """
    opts = opts or SolveOptions()
    cfg = cfg or PenaltyConfig()
    X = as_array(X)
    family("gaussian").check_data(X)
    inst = reduce(X, center=opts.center)
    res, H = fit_reduced(inst, cfg, opts)
    L = reconstruct_L(H, inst)
    basis = column_space(L, opts.rank_tol)
    coords = basis.T @ L
    L = basis @ coords
    d = inst.d
    res.params = ModelParams(np.zeros(d), res.theta, L)
    res.L_basis, res.L_coords = basis, coords
    res.rank = basis.shape[1]
    res.support = support_of(res.theta, opts.support_tol)
    res.center = inst.center if inst.center is not None else np.zeros(d)
    return res
