import numpy as np
import pytest

from lvgm.prox import PenaltyConfig
from lvgm.reduced import (
    fit_gaussian_reduced,
    fit_reduced,
    psd_sqrt,
    reconstruct_L,
    reduce,
    reduced_objective,
)
from lvgm.families import ModelParams
from lvgm.solver import SolveOptions, fit, objective_value
from conftest import random_orthonormal, random_pd


def test_reduce_examples(rng):
    inst = reduce(np.zeros((3, 5)))
    assert np.all(inst.sigma == 0) and np.all(inst.sqrt_sigma == 0)
    Q = random_orthonormal(rng, 6, 4)
    X = np.sqrt(6) * Q.T
    inst = reduce(X)
    assert np.allclose(inst.sigma, np.eye(4), atol=1e-12)
    assert np.allclose(inst.sqrt_sigma, np.eye(4), atol=1e-12)


@pytest.mark.parametrize("shape", [(5, 20), (8, 3)])
def test_reduce_invariants(rng, shape):
    X = rng.normal(size=shape)
    inst = reduce(X)
    assert np.allclose(inst.sqrt_sigma @ inst.sqrt_sigma, inst.sigma, atol=1e-8)
    k = min(shape)
    assert np.allclose(inst.U.T @ inst.U, np.eye(k), atol=1e-10)
    assert np.allclose(inst.V.T @ inst.V, np.eye(k), atol=1e-10)
    assert np.all(np.linalg.eigvalsh(inst.sqrt_sigma) >= -1e-12)


def test_psd_sqrt_clamps_negative_eigenvalues():
    S = np.diag([4.0, -1e-14, 1.0])
    assert np.allclose(psd_sqrt(S), np.diag([2.0, 0.0, 1.0]))


def test_identity_covariance_with_large_gamma(rng):
    Q = random_orthonormal(rng, 10, 3)
    inst = reduce(np.sqrt(10) * Q.T)
    res, H = fit_reduced(inst, PenaltyConfig(0.0, 10.0))
    assert np.all(H == 0)
    assert np.allclose(res.theta, np.eye(3), atol=1e-6)


def test_unpenalized_stationarity_in_H(rng):
    X = rng.normal(size=(4, 30))
    inst = reduce(X)
    res, H = fit_reduced(inst, PenaltyConfig(0.02, 0.0))
    assert np.allclose(H, res.theta @ inst.sqrt_sigma, atol=1e-5)


def test_reconstruction_examples(rng):
    X = rng.normal(size=(5, 9))
    inst = reduce(X)
    assert np.all(reconstruct_L(np.zeros((5, 5)), inst) == 0)
    H = rng.normal(size=(5, 2)) @ rng.normal(size=(2, 5))
    L = reconstruct_L(H, inst)
    assert np.linalg.matrix_rank(L, tol=1e-8) <= 2
    # Holder step: ||L||_* <= sqrt(n) ||H||_*
    nuc = lambda A: np.linalg.svd(A, compute_uv=False).sum()  # noqa: E731
    assert nuc(L) <= np.sqrt(inst.n) * nuc(H) * (1 + 1e-12)


@pytest.mark.parametrize("shape", [(5, 12), (7, 4)])
def test_reconstruction_objective_matches(rng, shape):
    d, n = shape
    X = rng.normal(size=shape)
    inst = reduce(X)
    theta = random_pd(rng, d)
    H = rng.normal(size=(d, d))
    H = H @ inst.U @ inst.U.T  # row space inside span(U) so nothing is lost
    cfg = PenaltyConfig(0.1, 0.3)
    full = objective_value(X, "gaussian", ModelParams(np.zeros(d), theta, reconstruct_L(H, inst)), cfg)
    assert full == pytest.approx(reduced_objective(theta, H, inst, cfg), rel=1e-10)


@pytest.mark.parametrize("shape,lam,gamma", [((12, 6), 0.05, 0.1), ((8, 40), 0.2, 0.5), ((8, 40), 0.05, 0.1)])
def test_equivalence_with_full_problem(rng, shape, lam, gamma):
    X = rng.normal(size=shape)
    X -= X.mean(axis=1, keepdims=True)
    cfg = PenaltyConfig(lam, gamma)
    full = fit(X, "gaussian", cfg)
    red = fit_gaussian_reduced(X, cfg)
    assert full.converged and red.converged
    tol = 1e-4 * (1 + abs(full.objective))
    assert abs(full.objective - red.objective) <= tol
    val = objective_value(X, "gaussian", red.params, cfg, center=red.center)
    assert abs(val - full.objective) <= tol
    assert np.allclose(full.theta, red.theta, atol=1e-3)


def test_equivariance_under_right_rotation(rng):
    X = rng.normal(size=(5, 8))
    W = random_orthonormal(rng, 8, 8)
    cfg = PenaltyConfig(0.1, 0.2)
    a, _ = fit_reduced(reduce(X), cfg)
    b, _ = fit_reduced(reduce(X @ W.T), cfg)
    assert np.allclose(a.theta, b.theta, atol=1e-5)
    # sample rotations do not commute with centering, so fit raw data
    raw = SolveOptions(center=False)
    full_a = fit(X, "gaussian", cfg, raw)
    full_b = fit(X @ W.T, "gaussian", cfg, raw)
    assert full_a.objective == pytest.approx(full_b.objective, rel=1e-6)
