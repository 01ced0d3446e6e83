import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_orthonormal
from lvgm.families import family, is_feasible
from lvgm.prox import PenaltyConfig, project_domain, project_exponential, prox_l1_theta, svt
from oracles import cvx_project_exponential, cvx_prox_l1, cvx_prox_nuclear


def sym(rng, d, scale=1.0):
    A = rng.normal(scale=scale, size=(d, d))
    return (A + A.T) / 2


def test_penalty_config_validation():
    with pytest.raises(ValueError):
        PenaltyConfig(-1.0, 0.0)
    with pytest.raises(ValueError):
        PenaltyConfig(0.0, float("inf"))


def test_prox_l1_examples():
    for kind in ("gaussian", "ising", "poisson", "exponential"):
        assert np.all(prox_l1_theta(np.zeros((3, 3)), 0.7, family(kind)) == 0)
    M = np.array([[1.0, 2.0], [2.0, 1.0]])
    assert prox_l1_theta(M, 0.5, family("gaussian"))[0, 1] == 1.5
    M = np.array([[0.0, -0.3], [-0.3, 0.0]])
    assert prox_l1_theta(M, 0.01, family("poisson"))[0, 1] == 0.0


def test_prox_l1_diagonal_rules():
    M = np.array([[2.0, 0.1], [0.1, 3.0]])
    g = prox_l1_theta(M, 0.5, family("gaussian"), PenaltyConfig())
    assert np.allclose(np.diag(g), [2.0, 3.0])
    g = prox_l1_theta(M, 0.5, family("gaussian"), PenaltyConfig(penalize_diagonal=True))
    assert np.allclose(np.diag(g), [1.5, 2.5])
    assert np.all(np.diag(prox_l1_theta(M, 0.5, family("ising"))) == 0)


@pytest.mark.parametrize("kind", ["gaussian", "ising", "poisson"])
def test_prox_l1_matches_brute_force(kind):
    rng = np.random.default_rng(1)
    fam = family(kind)
    worst = 0.0
    for _ in range(50):
        M = sym(rng, 3)
        t = rng.uniform(0.05, 1.0)
        ours = prox_l1_theta(M, t, fam, PenaltyConfig())
        ref = cvx_prox_l1(M, t, nonneg=fam.nonnegative_interactions, zero_diag=not fam.is_gaussian,
                          penalize_diag=False)
        worst = max(worst, np.max(np.abs(ours - ref)))
    assert worst <= 1e-6


def test_svt_examples():
    rng = np.random.default_rng(2)
    M = rng.normal(size=(3, 5))
    assert np.allclose(svt(M, 0.0), M, atol=1e-14)
    assert np.allclose(svt(np.diag([3.0, 1.0]), 2.0), np.diag([1.0, 0.0]))


def test_svt_matches_brute_force():
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in range(50):
        shape = (3, 3) if k % 2 == 0 else (3, 4)
        M = rng.normal(size=shape)
        t = rng.uniform(0.05, 1.5)
        worst = max(worst, np.max(np.abs(svt(M, t) - cvx_prox_nuclear(M, t))))
    assert worst <= 1e-6


@given(st.integers(0, 10_000), st.floats(0.0, 3.0))
def test_svt_orthogonal_equivariance(seed, t):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(4, 6))
    U, V = random_orthonormal(rng, 4, 4), random_orthonormal(rng, 6, 6)
    assert np.allclose(svt(U @ M @ V.T, t), U @ svt(M, t) @ V.T, atol=1e-10)


@given(st.integers(0, 10_000), st.floats(0.01, 3.0))
def test_svt_gram_path_matches_svd(seed, t):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(3, 40))
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    ref = (U * np.maximum(s - t, 0)) @ Vt
    out, sv = svt(M, t, return_singular_values=True)
    assert np.allclose(out, ref, atol=1e-10)
    assert np.allclose(np.sort(sv), np.sort(np.maximum(s - t, 0)[s > t]))
    assert np.allclose(svt(M.T, t), ref.T, atol=1e-10)


@given(st.integers(0, 10_000), st.floats(0.0, 2.0), st.sampled_from(["gaussian", "ising", "poisson", "exponential"]))
def test_prox_nonexpansive(seed, t, kind):
    rng = np.random.default_rng(seed)
    A, B = sym(rng, 4), sym(rng, 4)
    fam = family(kind)
    assert np.linalg.norm(prox_l1_theta(A, t, fam) - prox_l1_theta(B, t, fam)) <= np.linalg.norm(A - B) + 1e-12
    A, B = rng.normal(size=(4, 7)), rng.normal(size=(4, 7))
    assert np.linalg.norm(svt(A, t) - svt(B, t)) <= np.linalg.norm(A - B) + 1e-12


@given(st.integers(0, 10_000), st.sampled_from(["ising", "poisson", "exponential"]))
def test_prox_l1_symmetric_and_feasible(seed, kind):
    rng = np.random.default_rng(seed)
    fam = family(kind)
    out = prox_l1_theta(sym(rng, 5), rng.uniform(0, 1), fam)
    assert np.array_equal(out, out.T)
    assert is_feasible(fam, -np.ones(5), out)


def test_project_domain_examples():
    L = np.zeros((2, 3))
    a = np.array([0.5, -1.0])
    out, _ = project_domain(family("ising"), a, L)
    assert np.array_equal(out, a)
    out, _ = project_domain(family("exponential"), a, L, 1e-8)
    assert out[0] == pytest.approx(-1e-8, abs=1e-20) and out[1] == -1.0
    out, _ = project_domain(family("exponential"), -np.ones(2), L)
    assert np.array_equal(out, -np.ones(2))


def test_project_exponential_matches_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(10):
        d, m, n = 3, 5, 4.0
        a0 = rng.normal(size=d)
        Z = rng.normal(size=(d, m))
        a, L = project_exponential(a0, Z, n, 1e-8)
        assert np.all(a[:, None] + L <= -1e-8)
        ra, rl = cvx_project_exponential(a0, Z, n, 1e-8)
        assert np.allclose(a, ra, atol=1e-6) and np.allclose(L, rl, atol=1e-6)


def test_project_exponential_fixed_alpha():
    a = np.array([-0.5, -2.0])
    Z = np.array([[1.0, 0.0, 0.6], [0.0, 1.0, 3.0]])
    out_a, L = project_exponential(a, Z, 10.0, 0.0, fix_alpha=True)
    assert np.array_equal(out_a, a)
    assert np.all(a[:, None] + L <= 0)
    assert np.allclose(L, [[0.5, 0.0, 0.5], [0.0, 1.0, 2.0]])
