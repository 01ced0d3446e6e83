"""Proximal operators and domain projections used by the solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .families import FamilySpec


@dataclass(frozen=True)
class PenaltyConfig:
    """Weights of the l1 penalty on Theta and the nuclear norm on L."""

    lam: float = 0.0
    gamma: float = 0.0
    penalize_diagonal: bool = False

    def __post_init__(self):
        for name in ("lam", "gamma"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v!r}")


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def prox_l1_theta(M, t: float, fam: FamilySpec, cfg: PenaltyConfig | None = None) -> np.ndarray:
    """Prox of ``t*|Theta|_1`` plus the family's constraints on Theta.

    Off-diagonal entries are soft-thresholded by ``t`` (one-sided, i.e.
    ``max(M_ij - t, 0)``, for the families requiring Theta_ij >= 0). The
    diagonal is zeroed for non-Gaussian families and thresholded for the
    Gaussian only when ``cfg.penalize_diagonal`` is set.
    """
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    diag = np.diag(M).copy()
    if fam.nonnegative_interactions:
        out = np.maximum(M - t, 0.0)
    else:
        out = soft_threshold(M, t)
    if fam.is_gaussian:
        pen_diag = cfg is not None and cfg.penalize_diagonal
        out[np.diag_indices(d)] = soft_threshold(diag, t) if pen_diag else diag
    else:
        out[np.diag_indices(d)] = 0.0
    return out


def svt(M, t: float, return_singular_values: bool = False):
    """Singular value thresholding: the prox of ``t*|.|_*``.

    Short-and-wide (or tall-and-thin) inputs go through the eigendecomposition
    of the small Gram matrix, which is exact for every retained singular value
    and far cheaper than a full SVD when one side is long.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        out = M.copy()
        return (out, np.zeros(0)) if return_singular_values else out
    p, q = M.shape
    if max(p, q) >= 4 * min(p, q) and t > 0:
        out, s = _svt_gram(M, t)
    else:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
        s = np.maximum(s - t, 0.0)
        keep = s > 0
        out = (U[:, keep] * s[keep]) @ Vt[keep]
        s = s[keep]
    if return_singular_values:
        return out, s
    return out


def _svt_gram(M: np.ndarray, t: float):
    wide = M.shape[0] <= M.shape[1]
    A = M if wide else M.T
    w, V = np.linalg.eigh(A @ A.T)
    sig = np.sqrt(np.maximum(w, 0.0))
    keep = sig > t
    if not keep.any():
        return np.zeros_like(M), np.zeros(0)
    Vk = V[:, keep]
    scale = 1.0 - t / sig[keep]
    out = (Vk * scale) @ (Vk.T @ A)
    s = sig[keep] - t
    return (out if wide else out.T), s[::-1]


def project_domain(fam: FamilySpec, alpha, L, margin: float | None = None):
    """Enforce ``alpha_i + L_ik <= -margin`` (exponential family only).

    The correction is applied to alpha alone: each alpha_i is lowered just
    enough to clear the largest latent effect on that node.
    """
    alpha = np.asarray(alpha, dtype=float)
    if fam.kind != "exponential":
        return alpha, L
    margin = fam.strict_margin if margin is None else margin
    top = np.zeros_like(alpha) if L is None or L.size == 0 else L.max(axis=1)
    cap = -margin - top
    cap = np.where(cap + top > -margin, np.nextafter(cap, -np.inf), cap)
    return np.minimum(alpha, cap), L


def _below(cap, alpha, margin):
    """``cap`` nudged down so that ``alpha + cap <= -margin`` holds in floating point."""
    cap = np.asarray(cap, dtype=float)
    bad = alpha + cap > -margin
    while np.any(bad):
        cap = np.where(bad, np.nextafter(cap, -np.inf), cap)
        bad = alpha + cap > -margin
    return cap


def project_exponential(alpha, Z, n: float, margin: float, fix_alpha: bool = False, max_newton: int = 100):
    """Euclidean projection onto ``{alpha_i + L_ik <= -margin}``.

    The metric weights alpha by 1 and L by ``1/n``, matching the solver. For
    a fixed alpha the best L is ``min(Z, -margin - alpha)``; what remains is
    a scalar piecewise-linear equation per row, solved by Newton from the
    right (finite termination since the residual is convex and increasing).
    """
    a = np.asarray(alpha, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if not fix_alpha and Z.size:
        x = a.copy()
        for _ in range(max_newton):
            over = Z + x[:, None] + margin
            act = over > 0
            h = (x - a) + np.where(act, over, 0.0).sum(axis=1) / n
            if np.all(h <= 1e-15 * (1.0 + np.abs(x))):
                break
            x = x - h / (1.0 + act.sum(axis=1) / n)
        a = x
    elif not fix_alpha:
        a = np.minimum(a, -margin)
    if Z.size == 0:
        return a, Z.copy()
    cap = _below(-margin - a, a, margin)
    return a, np.minimum(Z, cap[:, None])
