"""Three-stage stability selection for latent-variable graphical models.

Stage 1 picks (lam, gamma) as the least regularization whose subsample
variability stays below a threshold. Stage 2 keeps the edges and latent
directions that are selected in most subsamples at that point. Stage 3 refits
without penalties on the selected structure.

Variability is measured as the mean Bernoulli variance of the selection
indicators: ``sum_e p_e (1 - p_e) / C(d, 2)`` over edges and
``sum_i mu_i (1 - mu_i) / d`` over the eigenvalues of the average projection
onto the estimated latent column spaces. Both lie in [0, 1/4].
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import as_array
from .errors import DomainError, InfeasibleStartError, SubsampleFailureError
from .families import ModelParams, family
from .prox import PenaltyConfig
from .solver import (
    Edge,
    FitResult,
    SolveOptions,
    StructureConstraints,
    _prepare,
    _Smooth,
    fit,
    lambda_max,
)

log = logging.getLogger(__name__)


@dataclass
class StabilityReport:
    freq: np.ndarray
    avg_projection: np.ndarray
    pi_graph: float
    pi_latent: float
    lam: float
    gamma: float
    num_subsamples: int
    failures: int = 0

    @property
    def edge_freq(self) -> Dict[Edge, float]:
        d = self.freq.shape[0]
        i, j = np.triu_indices(d, 1)
        return {(int(a), int(b)): float(self.freq[a, b]) for a, b in zip(i, j)}

    def to_json(self) -> dict:
        d = self.freq.shape[0]
        i, j = np.triu_indices(d, 1)
        keep = self.freq[i, j] > 0
        return {
            "lambda": self.lam,
            "gamma": self.gamma,
            "num_subsamples": self.num_subsamples,
            "failures": self.failures,
            "pi_graph": self.pi_graph,
            "pi_latent": self.pi_latent,
            "d": d,
            "edge_freq": [[int(a), int(b), float(self.freq[a, b])] for a, b in zip(i[keep], j[keep])],
            "avg_projection": [float(v) for v in self.avg_projection.ravel()],
        }


@dataclass
class SelectedStructure:
    edges: frozenset
    colspace: np.ndarray
    delta_graph: float
    delta_latent: float

    def to_json(self) -> dict:
        d, k = self.colspace.shape
        return {
            "edges": sorted([list(e) for e in self.edges]),
            "colspace_dim": k,
            "colspace": [float(v) for v in self.colspace.ravel()],
            "d": d,
            "delta_graph": self.delta_graph,
            "delta_latent": self.delta_latent,
        }


@dataclass
class Stage1Result:
    lam: float
    gamma: float
    report: StabilityReport
    warning: bool
    path: List[Tuple[float, float, float, float]] = field(default_factory=list)


def pi_graph(freq: np.ndarray) -> float:
    d = freq.shape[0]
    if d < 2:
        return 0.0
    p = freq[np.triu_indices(d, 1)]
    return float(np.sum(p * (1.0 - p)) / p.size)


def pi_latent(avg_projection: np.ndarray) -> float:
    d = avg_projection.shape[0]
    if d == 0:
        return 0.0
    mu = np.clip(np.linalg.eigvalsh(avg_projection), 0.0, 1.0)
    return float(np.sum(mu * (1.0 - mu)) / d)


def subsample_indices(n: int, num_subsamples: int, seed) -> List[np.ndarray]:
    """Half-size subsamples without replacement, one random stream per subsample."""
    if n < 4:
        raise ValueError("stability selection needs at least 4 samples")
    out = []
    for l in range(num_subsamples):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(l,)))
        out.append(np.sort(rng.choice(n, size=n // 2, replace=False)))
    return out


_FIT_ERRORS = (DomainError, InfeasibleStartError, np.linalg.LinAlgError, FloatingPointError)


def subsample_fit(X, fam, lam: float, gamma: float, num_subsamples: int = 50, seed=0,
                  opts: Optional[SolveOptions] = None, warm: Optional[dict] = None,
                  threads: int = 1, max_failure_rate: float = 0.2,
                  no_latent: bool = False) -> StabilityReport:
    """Fit every half-sample at (lam, gamma) and aggregate the selections.

    ``warm`` maps a subsample index to parameters used as that subsample's
    starting point; it is updated in place with the new solutions. A fit
    counts as failed if it raises a solver error or ends without converging.
    ``no_latent`` forces L = 0 in every fit.
    """
    fam = family(fam)
    Xa = as_array(X)
    d, n = Xa.shape
    idx = subsample_indices(n, num_subsamples, seed)
    cfg = PenaltyConfig(lam, gamma)
    opts = opts or SolveOptions()
    cons = StructureConstraints(colspace=np.zeros((d, 0))) if no_latent else None

    def one(l):
        init = None if warm is None else warm.get(l)
        try:
            res = fit(Xa[:, idx[l]], fam, cfg, opts, cons, init=init)
        except _FIT_ERRORS as exc:
            log.warning("subsample %d failed: %s", l, exc)
            return l, None
        return l, res

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(num_subsamples)))
    else:
        results = [one(l) for l in range(num_subsamples)]

    freq = np.zeros((d, d))
    proj = np.zeros((d, d))
    ok = 0
    for l, res in results:
        if res is None or not res.converged:
            continue
        ok += 1
        if warm is not None:
            warm[l] = res.params
        S = np.abs(res.theta) > opts.support_tol
        np.fill_diagonal(S, False)
        freq += S
        U = res.L_basis
        proj += U @ U.T
    failures = num_subsamples - ok
    if failures > max_failure_rate * num_subsamples:
        raise SubsampleFailureError(
            f"{failures} of {num_subsamples} subsample fits failed at lambda={lam}, gamma={gamma}"
        )
    freq /= ok
    proj /= ok
    proj = 0.5 * (proj + proj.T)
    return StabilityReport(freq, proj, pi_graph(freq), pi_latent(proj), float(lam),
                           float(gamma), num_subsamples, failures)


def default_grids(X, fam, num_lambda: int = 10, num_gamma: int = 10, seed=0,
                  lam_ratio: float = 0.05, gamma_ratio: float = 0.5,
                  opts: Optional[SolveOptions] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Descending (lam, gamma) grids sized from the data.

    Lambda runs geometrically from ``lambda_max`` down by ``lam_ratio``. The
    gamma grid starts at the smallest gamma that keeps L at zero for a
    half-sample fit at the largest lambda, and runs down by ``gamma_ratio``.
    """
    fam = family(fam)
    Xa = as_array(X)
    d, n = Xa.shape
    lmax = lambda_max(Xa, fam)
    lams = lmax * np.geomspace(1.0, lam_ratio, num_lambda) if num_lambda > 1 else np.array([lmax])
    opts = opts or SolveOptions()
    sub = Xa[:, subsample_indices(n, 1, seed)[0]]
    res = fit(sub, fam, PenaltyConfig(lams[0], 0.0), opts, StructureConstraints(colspace=np.zeros((d, 0))))
    Xc, _ = _prepare(sub, fam, opts)
    p = res.params
    _, _, _, gl = _Smooth(Xc, fam).full(p.alpha, p.theta, np.zeros_like(Xc))
    s1 = float(np.linalg.norm(gl, 2))
    gams = s1 * np.geomspace(1.0, gamma_ratio, num_gamma) if num_gamma > 1 else np.array([s1])
    return lams, gams


def stage1_select(X, fam, lam_grid: Sequence[float], gamma_grid: Sequence[float],
                  t_graph: float = 0.025, t_latent: float = 0.025, num_subsamples: int = 50,
                  seed=0, opts: Optional[SolveOptions] = None, threads: int = 1,
                  order: str = "gamma_first", no_latent: bool = False) -> Stage1Result:
    """Two sequential one-dimensional scans for the regularization pair.

    With ``order='gamma_first'`` gamma is lowered at the largest lambda until
    the latent variability first exceeds ``t_latent`` and the previous gamma
    is kept; lambda is then lowered the same way against ``t_graph``. If a
    scan never crosses its threshold the smallest grid value is returned and
    ``warning`` is set. With ``no_latent`` only lambda is scanned.
    """
    lams = [float(v) for v in lam_grid]
    gams = [float(v) for v in gamma_grid]
    if not lams or not gams:
        raise ValueError("empty regularization grid")
    if any(np.diff(lams) > 0) or any(np.diff(gams) > 0):
        raise ValueError("grids must be sorted in descending order")
    if order not in ("gamma_first", "lambda_first"):
        raise ValueError("order must be 'gamma_first' or 'lambda_first'")
    cache: Dict[Tuple[float, float], StabilityReport] = {}
    warm: dict = {}
    path = []

    def report(lam, gam):
        key = (lam, gam)
        if key not in cache:
            cache[key] = subsample_fit(X, fam, lam, gam, num_subsamples, seed, opts, warm, threads,
                                       no_latent=no_latent)
            r = cache[key]
            path.append((lam, gam, r.pi_graph, r.pi_latent))
        return cache[key]

    def scan(values, make_key, stat, thresh):
        kept = values[0]
        for k, v in enumerate(values):
            if stat(report(*make_key(v))) > thresh:
                return (values[k - 1] if k > 0 else values[0]), False
            kept = v
        return kept, True

    if no_latent:
        gams = gams[:1]
    if order == "gamma_first":
        gam, w1 = scan(gams, lambda g: (lams[0], g), lambda r: r.pi_latent, t_latent)
        lam, w2 = scan(lams, lambda l: (l, gam), lambda r: r.pi_graph, t_graph)
    else:
        lam, w1 = scan(lams, lambda l: (l, gams[0]), lambda r: r.pi_graph, t_graph)
        gam, w2 = scan(gams, lambda g: (lam, g), lambda r: r.pi_latent, t_latent)
    warning = w1 or w2
    if warning:
        log.warning("a stability threshold was never exceeded; using the smallest grid value")
    return Stage1Result(lam, gam, report(lam, gam), warning, path)


def stage2_structure(report: StabilityReport, delta_graph: float = 0.7,
                     delta_latent: float = 0.7) -> SelectedStructure:
    """Edges selected at least ``delta_graph`` of the time, and the latent
    directions whose average-projection eigenvalue is at least ``delta_latent``."""
    for name, v in (("delta_graph", delta_graph), ("delta_latent", delta_latent)):
        if not 0 < v <= 1:
            raise ValueError(f"{name} must lie in (0, 1]")
    d = report.freq.shape[0]
    i, j = np.triu_indices(d, 1)
    keep = report.freq[i, j] >= delta_graph
    edges = frozenset(zip(i[keep].tolist(), j[keep].tolist()))
    w, Q = np.linalg.eigh(report.avg_projection)
    C = Q[:, w >= delta_latent][:, ::-1]
    return SelectedStructure(edges, C, float(delta_graph), float(delta_latent))


def stage3_refit(X, fam, structure: SelectedStructure, opts: Optional[SolveOptions] = None,
                 init: Optional[ModelParams] = None) -> FitResult:
    """Unpenalized fit restricted to the selected edges and latent column space."""
    cons = StructureConstraints(support=structure.edges, colspace=structure.colspace)
    return fit(X, fam, PenaltyConfig(0.0, 0.0), opts, cons, init=init)


@dataclass
class SelectionOutcome:
    stage1: Stage1Result
    single_fit: FitResult
    structure: SelectedStructure
    refit: FitResult


def select(X, fam, lam_grid=None, gamma_grid=None, t_graph: float = 0.025,
           t_latent: float = 0.025, delta_graph: float = 0.7, delta_latent: float = 0.7,
           num_subsamples: int = 50, seed=0, opts: Optional[SolveOptions] = None,
           threads: int = 1, num_lambda: int = 10, num_gamma: int = 10,
           order: str = "gamma_first", refit: bool = True,
           no_latent: bool = False) -> SelectionOutcome:
    """Run all three stages. ``single_fit`` is the full-data fit at the stage-1 pair."""
    fam = family(fam)
    d = as_array(X).shape[0]
    if no_latent and gamma_grid is None:
        gamma_grid = [0.0]
    if lam_grid is None or gamma_grid is None:
        dl, dg = default_grids(X, fam, num_lambda, num_gamma, seed, opts=opts)
        lam_grid = dl if lam_grid is None else lam_grid
        gamma_grid = dg if gamma_grid is None else gamma_grid
    s1 = stage1_select(X, fam, lam_grid, gamma_grid, t_graph, t_latent, num_subsamples,
                       seed, opts, threads, order, no_latent)
    cons = StructureConstraints(colspace=np.zeros((d, 0))) if no_latent else None
    single = fit(X, fam, PenaltyConfig(s1.lam, s1.gamma), opts, cons)
    st = stage2_structure(s1.report, delta_graph, delta_latent)
    ref = stage3_refit(X, fam, st, opts) if refit else None
    return SelectionOutcome(s1, single, st, ref)
