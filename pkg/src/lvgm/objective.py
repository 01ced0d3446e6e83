"""Smooth parts of the two fitted objectives and their gradients.

``gaussian_smooth`` is the exact conditional negative log-likelihood of the
Gaussian model with alpha fixed at zero (data centered), up to the constant
``d/2 log 2pi``::

    tr(L'Theta^-1 L)/2n - logdet(Theta)/2 - tr(L'X)/n + tr(Theta XX')/2n

``pseudo_smooth`` is the negative log pseudo-likelihood for the Ising,
Poisson and exponential families::

    1/n sum_k [ sum_i rho(u_ik) - (alpha + L_k)'x_k + x_k'Theta x_k ]

with u_ik the node-conditional natural parameters. The quadratic term is not
halved: each pair appears once in each of its two node conditionals.

All gradients with respect to Theta are Frobenius gradients on the space of
symmetric matrices, so ``<grad_theta, D>`` is the directional derivative
along any symmetric D.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .data import as_array
from .families import FamilySpec, cholesky, rho_and_prime


@dataclass
class SmoothEval:
    value: float
    grad_alpha: np.ndarray
    grad_theta: np.ndarray
    grad_L: np.ndarray


def gaussian_smooth(theta, L, X, n: Optional[float] = None) -> SmoothEval:
    """Gaussian conditional likelihood term and gradients.

    ``n`` overrides the normalizing sample count; the reduced d x d problem
    evaluates this same expression on a d-column surrogate data matrix while
    keeping the original n.
    """
    X = as_array(X)
    theta = np.asarray(theta, dtype=float)
    d, m = X.shape
    n = float(m if n is None else n)
    L = np.zeros_like(X) if L is None else np.asarray(L, dtype=float)
    chol = cholesky(theta)
    tinv_L = linalg.cho_solve((chol, True), L)
    tinv = linalg.cho_solve((chol, True), np.eye(d))
    tinv = 0.5 * (tinv + tinv.T)
    S = X @ X.T / n
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    value = (
        0.5 * np.sum(L * tinv_L) / n
        - 0.5 * logdet
        - np.sum(L * X) / n
        + 0.5 * np.sum(theta * S)
    )
    g_theta = -0.5 * (tinv_L @ tinv_L.T) / n - 0.5 * tinv + 0.5 * S
    g_theta = 0.5 * (g_theta + g_theta.T)
    return SmoothEval(float(value), np.zeros(d), g_theta, (tinv_L - X) / n)


def pseudo_smooth(alpha, theta, L, X, fam: FamilySpec) -> SmoothEval:
    """Negative log pseudo-likelihood and gradients (non-Gaussian families)."""
    if fam.is_gaussian:
        raise ValueError("the Gaussian family uses gaussian_smooth, not the pseudo-likelihood")
    X = as_array(X)
    alpha = np.asarray(alpha, dtype=float)
    theta = np.asarray(theta, dtype=float)
    d, n = X.shape
    eff = alpha[:, None] if L is None else alpha[:, None] + L
    diag = np.diag(theta)
    TX = theta @ X
    U = eff - (TX - diag[:, None] * X)
    r_val, R = rho_and_prime(fam, U)
    value = (np.sum(r_val) - np.sum(eff * X) + np.sum(X * TX)) / n
    resid = R - X
    gram = X @ X.T
    M = (gram - R @ X.T) / n
    M[np.diag_indices(d)] = np.diag(gram) / n
    g_theta = 0.5 * (M + M.T)
    return SmoothEval(float(value), resid.sum(axis=1) / n, g_theta, resid / n)


def smooth(alpha, theta, L, X, fam: FamilySpec, n: Optional[float] = None) -> SmoothEval:
    """Dispatch to the family's smooth objective."""
    if fam.is_gaussian:
        return gaussian_smooth(theta, L, X, n=n)
    return pseudo_smooth(alpha, theta, L, X, fam)


def penalty_value(theta, L, lam: float, gamma: float, penalize_diagonal: bool = False) -> float:
    """``lam * |Theta|_1 + gamma * |L|_*`` with the diagonal optionally excluded."""
    theta = np.asarray(theta, dtype=float)
    a = np.abs(theta)
    l1 = a.sum() if penalize_diagonal else a.sum() - np.trace(a)
    nuc = 0.0
    if L is not None and gamma != 0 and L.size:
        nuc = np.linalg.svd(L, compute_uv=False).sum()
    return float(lam * l1 + gamma * nuc)
