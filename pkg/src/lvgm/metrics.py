"""Structure-recovery scores and held-out likelihood evaluation."""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .data import as_array
from .families import LOG_2PI
from .prox import PenaltyConfig
from .solver import FitResult, SolveOptions, StructureConstraints, fit, support_of


def _edge_set(edges):
    return frozenset(tuple(sorted(e)) for e in edges)


def fdr_pwr(estimated, truth) -> Tuple[float, float]:
    """False discovery rate and power (true-positive rate) of an edge set."""
    est, tru = _edge_set(estimated), _edge_set(truth)
    fdr = len(est - tru) / max(len(est), 1)
    pwr = len(est & tru) / max(len(tru), 1)
    return fdr, pwr


def recovery_success(result: FitResult, truth_theta, truth_rank: int, tol: float = 1e-8) -> bool:
    """Exact support and rank recovery."""
    truth_theta = np.asarray(truth_theta)
    if truth_theta.shape != result.theta.shape:
        raise ValueError("fitted and true Theta differ in shape")
    return result.support == support_of(truth_theta, tol) and result.rank == truth_rank


def holdout_fit(model: FitResult, X_test, opts: Optional[SolveOptions] = None) -> FitResult:
    """Unpenalized refit of L on test data with alpha and Theta held at the model's values.

    Every column of L is confined to the column space of the model's L (a
    zero-dimensional space for a model without latent variables).
    """
    d = model.theta.shape[0]
    basis = model.L_basis if model.L_basis is not None else np.zeros((d, 0))
    cons = StructureConstraints(
        colspace=basis, fix_alpha=model.params.alpha, fix_theta=model.theta
    )
    opts = opts or SolveOptions()
    X = as_array(X_test)
    if model.family.is_gaussian:
        center = model.center if model.center is not None else np.zeros(d)
        X = X - center[:, None]
        opts = SolveOptions(**{**opts.__dict__, "center": False})
    return fit(X, model.family, PenaltyConfig(), opts, cons)


def holdout_nll(model: FitResult, X_test, opts: Optional[SolveOptions] = None,
                return_fit: bool = False):
    """Per-sample negative log (pseudo-)likelihood on test data.

    For the Gaussian family the value includes the ``d/2 log 2pi`` constant,
    so it is the exact average negative log-density. For discrete families
    the infimum over L need not be attained (a test sample whose signs line
    up with a latent direction drives its coordinate off to infinity); the
    refit then stops unconverged and the value is an upper bound. With
    ``return_fit`` the refit is returned as well, so callers can check.
    """
    res = holdout_fit(model, X_test, opts)
    val = res.objective
    if model.family.is_gaussian:
        val += 0.5 * model.theta.shape[0] * LOG_2PI
    return (float(val), res) if return_fit else float(val)
