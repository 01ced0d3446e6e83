"""Exponential-family building blocks.

Four pairwise families are supported. Each has a density of the form

    f(x; alpha, Theta) = h(x) exp{alpha'x - x'Theta x / 2 - Phi(alpha, Theta)}

over a domain X^d. For the non-Gaussian families the node-conditional
distribution of x_i given the rest is a one-dimensional exponential family
with natural parameter

    u_i = alpha_i + (Bz)_i - sum_{j != i} Theta_ij x_j

and log-partition ``rho(u)``. The base measure h only matters when sampling
(the Poisson 1/x! factor is implicit in the Poisson pmf); every objective in
this package drops it because it does not depend on the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import DomainError, NotPositiveDefiniteError

KINDS = ("gaussian", "ising", "poisson", "exponential")

_DOMAINS = {
    "gaussian": "real line",
    "ising": "{-1, +1}",
    "poisson": "nonnegative integers",
    "exponential": "positive reals",
}

LOG_2PI = np.log(2.0 * np.pi)
_LOG2 = np.log(2.0)


@dataclass(frozen=True)
class FamilySpec:
    """One of the four supported families.

    ``strict_margin`` turns the open constraints (Theta positive definite for
    the Gaussian, natural parameters negative for the exponential family)
    into closed ones shrunk by the margin.
    """

    kind: str
    strict_margin: float = 1e-8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family {self.kind!r}; expected one of {KINDS}")
        if self.strict_margin < 0:
            raise ValueError("strict_margin must be nonnegative")
        if self.kind in ("gaussian", "exponential") and self.strict_margin <= 0:
            raise ValueError(f"{self.kind} family needs a positive strict_margin")

    @property
    def domain(self) -> str:
        return _DOMAINS[self.kind]

    @property
    def is_gaussian(self) -> bool:
        return self.kind == "gaussian"

    @property
    def nonnegative_interactions(self) -> bool:
        return self.kind in ("poisson", "exponential")

    def check_data(self, X) -> None:
        """Raise ``DomainError`` naming the first entry outside the domain."""
        X = np.asarray(X, dtype=float)
        bad = ~np.isfinite(X)
        if self.kind == "ising":
            bad |= (X != 1.0) & (X != -1.0)
        elif self.kind == "poisson":
            bad |= (X < 0) | (X != np.round(X))
        elif self.kind == "exponential":
            bad |= X <= 0
        if bad.any():
            i, k = np.argwhere(bad)[0]
            raise DomainError(
                f"value {X[i, k]!r} at variable {i}, sample {k} is outside the "
                f"{self.kind} domain ({self.domain})"
            )


def family(kind: str, strict_margin: float = 1e-8) -> FamilySpec:
    """Shorthand constructor, accepting an existing spec unchanged."""
    if isinstance(kind, FamilySpec):
        return kind
    return FamilySpec(kind, strict_margin)


@dataclass
class ModelParams:
    """Node potentials, interaction matrix and per-sample latent effects.

    For population (ground-truth) models ``L`` is absent and ``B`` holds the
    d x r loading matrix instead.
    """

    alpha: np.ndarray
    theta: np.ndarray
    L: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None

    @property
    def d(self) -> int:
        return self.theta.shape[0]

    def latent_effect(self, n: int) -> np.ndarray:
        if self.L is None:
            return np.zeros((self.d, n))
        return self.L

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.alpha.copy(),
            self.theta.copy(),
            None if self.L is None else self.L.copy(),
            None if self.B is None else self.B.copy(),
        )


def rho(fam: FamilySpec, u):
    """One-dimensional conditional log-partition, elementwise."""
    u = np.asarray(u, dtype=float)
    kind = fam.kind
    if kind == "ising":
        a = np.abs(u)
        out = a + np.log1p(np.exp(-2.0 * a)) - _LOG2
    elif kind == "poisson":
        out = np.exp(u)
    elif kind == "exponential":
        _check_exponential(fam, u)
        out = -np.log(-u)
    else:
        out = 0.5 * u * u + 0.5 * LOG_2PI
    return out if out.ndim else float(out)


def rho_prime(fam: FamilySpec, u):
    """Derivative of :func:`rho`, i.e. the conditional mean."""
    u = np.asarray(u, dtype=float)
    kind = fam.kind
    if kind == "ising":
        out = np.tanh(u)
    elif kind == "poisson":
        out = np.exp(u)
    elif kind == "exponential":
        _check_exponential(fam, u)
        out = -1.0 / u
    else:
        out = u.copy()
    return out if out.ndim else float(out)


def rho_and_prime(fam: FamilySpec, u: np.ndarray):
    """Both ``rho(u)`` and ``rho'(u)`` with shared transcendental work."""
    kind = fam.kind
    if kind == "ising":
        a = np.abs(u)
        e = np.exp(-2.0 * a)
        val = a + np.log1p(e) - _LOG2
        der = np.copysign((1.0 - e) / (1.0 + e), u)
        return val, der
    if kind == "poisson":
        e = np.exp(u)
        return e, e
    if kind == "exponential":
        _check_exponential(fam, u)
        return -np.log(-u), -1.0 / u
    return 0.5 * u * u + 0.5 * LOG_2PI, u.copy()


def _check_exponential(fam: FamilySpec, u: np.ndarray) -> None:
    # boundary u == -margin is admissible (closed shrunk constraint)
    if np.any(u > -fam.strict_margin) or np.any(np.isnan(u)):
        worst = float(np.nanmax(u)) if np.size(u) else float("nan")
        raise DomainError(
            f"exponential log-partition needs u <= -{fam.strict_margin:g}, got max u = {worst:g}"
        )


def log_partition_gaussian(alpha, theta) -> float:
    """Exact Gaussian log-partition ``(alpha'Theta^-1 alpha - logdet Theta + d log 2pi) / 2``."""
    alpha = np.asarray(alpha, dtype=float)
    theta = np.asarray(theta, dtype=float)
    chol = cholesky(theta)
    w = linalg.solve_triangular(chol, alpha, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return 0.5 * (w @ w - logdet + theta.shape[0] * LOG_2PI)


def cholesky(theta: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, raising ``NotPositiveDefiniteError`` on failure."""
    try:
        chol = linalg.cholesky(theta, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from None
    if not np.all(np.diag(chol) > 0):
        raise NotPositiveDefiniteError("matrix is not positive definite")
    return chol


def is_feasible(fam: FamilySpec, alpha_eff, theta) -> bool:
    """Membership of ``(alpha_eff, theta)`` in the family's valid-parameter set.

    ``alpha_eff`` may be a vector or a d x n matrix of per-sample effective
    node potentials (alpha plus a latent-effect column).
    """
    theta = np.asarray(theta, dtype=float)
    if not np.allclose(theta, theta.T, rtol=0, atol=1e-12):
        return False
    if fam.kind == "gaussian":
        try:
            cholesky(theta - fam.strict_margin * np.eye(theta.shape[0]))
        except NotPositiveDefiniteError:
            return False
        return True
    if np.any(np.diag(theta) != 0):
        return False
    if fam.kind == "ising":
        return True
    off = theta[~np.eye(theta.shape[0], dtype=bool)]
    if np.any(off < 0):
        return False
    if fam.kind == "exponential":
        return bool(np.all(np.asarray(alpha_eff) <= -fam.strict_margin))
    return True


def node_conditional_param(fam: FamilySpec, alpha, latent_effect, theta, x, i: int) -> float:
    """Natural parameter of x_i given the other coordinates."""
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    row = theta[i].copy()
    row[i] = 0.0
    return float(alpha[i] + latent_effect[i] - row @ x)


def conditional_params(alpha, latent_effect, theta, X) -> np.ndarray:
    """All node-conditional natural parameters for a d x n batch ``X``."""
    off = theta - np.diag(np.diag(theta))
    return np.asarray(alpha)[:, None] + latent_effect - off @ X
