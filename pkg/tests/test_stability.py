import numpy as np
import pytest

import lvgm.stability as stab
from lvgm.errors import SubsampleFailureError
from lvgm.prox import PenaltyConfig
from lvgm.solver import SolveOptions, StructureConstraints, column_space, fit, lambda_max
from lvgm.stability import (
    StabilityReport,
    default_grids,
    pi_graph,
    pi_latent,
    select,
    stage1_select,
    stage2_structure,
    stage3_refit,
    subsample_fit,
    subsample_indices,
    SelectedStructure,
)
from lvgm.synth import TruthSpec, make_truth, sample


@pytest.fixture(scope="module")
def ising10():
    spec = TruthSpec.reference("ising", 10, 1)
    tr = make_truth(spec, 0)
    return sample(spec, tr.theta, tr.B, 600, seed=0, alpha=tr.alpha), tr


def test_pi_examples():
    f = np.zeros((3, 3))
    assert pi_graph(f) == 0
    f[0, 1] = f[1, 0] = 1.0
    assert pi_graph(f) == 0
    f[0, 1] = f[1, 0] = 0.5
    assert pi_graph(f) == pytest.approx(0.25 / 3)
    assert pi_latent(np.zeros((4, 4))) == 0
    P = np.diag([0.5, 0.0, 1.0])
    assert pi_latent(P) == pytest.approx(0.25 / 3)


def test_subsample_indices():
    idx = subsample_indices(11, 5, 3)
    assert len(idx) == 5
    for i in idx:
        assert len(i) == 5 and len(set(i.tolist())) == 5 and i.max() < 11
    again = subsample_indices(11, 7, 3)
    assert all(np.array_equal(a, b) for a, b in zip(idx, again))
    with pytest.raises(ValueError):
        subsample_indices(3, 2, 0)


def test_report_invariants(ising10):
    X, _ = ising10
    rep = subsample_fit(X, "ising", 0.1, 0.05, num_subsamples=8, seed=1)
    assert np.all((rep.freq >= 0) & (rep.freq <= 1))
    w = np.linalg.eigvalsh(rep.avg_projection)
    assert w.min() >= -1e-10 and w.max() <= 1 + 1e-10
    assert 0 <= rep.pi_graph <= 0.25 and 0 <= rep.pi_latent <= 0.25
    assert np.trace(rep.avg_projection) <= 10
    js = rep.to_json()
    assert js["num_subsamples"] == 8 and len(js["avg_projection"]) == 100


def test_zero_latent_report(ising10):
    X, _ = ising10
    rep = subsample_fit(X, "ising", 0.1, 0.0, num_subsamples=4, seed=1, no_latent=True)
    assert np.all(rep.avg_projection == 0) and rep.pi_latent == 0


def test_repeated_subsamples_leave_report_unchanged(ising10, monkeypatch):
    X, _ = ising10
    base = subsample_indices(X.n, 3, 5)
    monkeypatch.setattr(stab, "subsample_indices", lambda n, b, s: (base * (b // 3))[:b])
    a = subsample_fit(X, "ising", 0.1, 0.05, num_subsamples=3)
    b = subsample_fit(X, "ising", 0.1, 0.05, num_subsamples=9)
    assert np.allclose(a.freq, b.freq, atol=1e-12)
    assert np.allclose(a.avg_projection, b.avg_projection, atol=1e-12)


def test_permutation_invariance(ising10):
    X, _ = ising10
    perm = np.random.default_rng(0).permutation(10)
    a = subsample_fit(X, "ising", 0.08, 0.05, num_subsamples=6, seed=2)
    b = subsample_fit(X.values[perm], "ising", 0.08, 0.05, num_subsamples=6, seed=2)
    assert b.pi_graph == pytest.approx(a.pi_graph, abs=1e-9)
    assert b.pi_latent == pytest.approx(a.pi_latent, abs=1e-6)
    assert np.allclose(b.freq, a.freq[np.ix_(perm, perm)])


def test_too_many_failures(ising10):
    X, _ = ising10
    with pytest.raises(SubsampleFailureError):
        subsample_fit(X, "ising", 0.05, 0.02, num_subsamples=4, opts=SolveOptions(max_iter=2))


def test_stage1_examples(ising10):
    X, _ = ising10
    out = stage1_select(X, "ising", [0.2], [0.3], num_subsamples=4)
    assert (out.lam, out.gamma) == (0.2, 0.3)
    lams, gams = default_grids(X, "ising", 6, 6)
    assert np.all(np.diff(lams) < 0) and np.all(np.diff(gams) < 0)
    with pytest.raises(ValueError):
        stage1_select(X, "ising", lams[::-1], gams)


def test_stage1_respects_thresholds(ising10):
    X, _ = ising10
    lams, gams = default_grids(X, "ising", 8, 8)
    out = stage1_select(X, "ising", lams, gams, num_subsamples=10)
    assert out.report.pi_graph <= 0.025 and out.report.pi_latent <= 0.025
    zero = stage1_select(X, "ising", lams, gams, 0.0, 0.0, num_subsamples=10)
    # every later grid point already shows variability
    assert zero.lam >= out.lam and zero.gamma >= out.gamma


def test_stage2_examples():
    d = 4
    freq = np.ones((d, d))
    P = np.zeros((d, d))
    P[:2, :2] = np.eye(2)
    rep = StabilityReport(freq, P, 0.0, 0.0, 0.1, 0.1, 10)
    st = stage2_structure(rep)
    assert len(st.edges) == 6 and st.colspace.shape == (4, 2)
    freq = np.zeros((d, d))
    freq[0, 1] = freq[1, 0] = 0.69
    freq[2, 3] = freq[3, 2] = 0.7
    Q = np.linalg.qr(np.random.default_rng(0).normal(size=(3, 3)))[0]
    P3 = Q @ np.diag([0.9, 0.71, 0.3]) @ Q.T
    st = stage2_structure(StabilityReport(freq[:3, :3], P3, 0, 0, 0, 0, 1))
    assert st.edges == frozenset() and st.colspace.shape == (3, 2)
    assert np.allclose(st.colspace.T @ st.colspace, np.eye(2))
    st = stage2_structure(StabilityReport(freq, np.zeros((4, 4)), 0, 0, 0, 0, 1))
    assert st.edges == frozenset({(2, 3)}) and st.colspace.shape == (4, 0)
    with pytest.raises(ValueError):
        stage2_structure(rep, 0.0)


def test_stage3_examples(rng):
    X = rng.normal(size=(4, 200)) * np.array([1.0, 2.0, 0.5, 3.0])[:, None]
    res = stage3_refit(X, "gaussian", SelectedStructure(frozenset(), np.zeros((4, 0)), 0.7, 0.7))
    var = X.var(axis=1)
    assert np.allclose(res.theta, np.diag(1 / var), rtol=1e-6)


def test_stage3_oracle_structure_beats_penalized_fit():
    spec = TruthSpec.reference("gaussian", 10, 1)
    tr = make_truth(spec, 1)
    X = sample(spec, tr.theta, tr.B, 4000, seed=1)
    C = column_space(tr.B)
    st = SelectedStructure(tr.edges, C, 0.7, 0.7)
    ref = stage3_refit(X, "gaussian", st)
    assert ref.support <= tr.edges
    assert np.allclose(ref.L - C @ (C.T @ ref.L), 0, atol=1e-10)
    stage1 = select(X, "gaussian", num_subsamples=10, num_lambda=8, num_gamma=8, refit=False)
    err = lambda th: np.linalg.norm(th - tr.theta)  # noqa: E731
    assert err(ref.theta) < err(stage1.single_fit.theta)


def test_support_size_monotone_in_lambda(ising10):
    X, _ = ising10
    lm = lambda_max(X, "ising")
    sizes = [len(fit(X, "ising", PenaltyConfig(f * lm, 0.05)).support) for f in np.geomspace(1, 0.05, 12)]
    assert all(a <= b for a, b in zip(sizes, sizes[1:]))


def test_select_pipeline(ising10):
    X, tr = ising10
    out = select(X, "ising", num_subsamples=8, num_lambda=6, num_gamma=6)
    assert out.refit.support <= out.structure.edges
    assert out.refit.rank <= out.structure.colspace.shape[1]
    nl = select(X, "ising", num_subsamples=6, num_lambda=5, no_latent=True)
    assert nl.structure.colspace.shape[1] == 0 and nl.refit.rank == 0
