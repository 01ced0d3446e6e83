"""Seeded structure-recovery trials over a (lambda, gamma) grid.

The lambda axis follows the usual ``c1 * sqrt(d/n)`` scaling. The gamma axis
is placed where a single latent direction can enter: at a latent-free fit the
leading singular value s1 of the L gradient is the smallest gamma that keeps
L at zero, and the second one s2 marks where a second direction would come
in. Once L has taken up the leading direction the second one usually needs
a somewhat smaller gamma to enter, so the gamma values are spread evenly
over (floor * s2, s1) with ``floor`` slightly below one.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .families import family
from .metrics import recovery_success
from .prox import PenaltyConfig
from .solver import FitResult, SolveOptions, StructureConstraints, _prepare, _Smooth, fit, kkt_check
from .synth import TruthSpec, make_truth, sample

log = logging.getLogger(__name__)


def lambda_grid(d: int, n: int, c1_min: float, c1_max: float, num: int) -> np.ndarray:
    """Descending geometric grid ``c1 * sqrt(d/n)``."""
    c = np.geomspace(c1_max, c1_min, num) if num > 1 else np.array([c1_max])
    return c * np.sqrt(d / n)


def latent_entry_points(X, fam, lam: float, opts: Optional[SolveOptions] = None, init=None):
    """Two leading singular values of the L gradient at the latent-free fit.

    Returns ``(s, fit0)`` where ``fit0`` is the latent-free fit at ``lam``.
    """
    fam = family(fam)
    opts = opts or SolveOptions()
    d = np.asarray(X.values if hasattr(X, "values") else X).shape[0]
    fit0 = fit(X, fam, PenaltyConfig(lam, 0.0), opts,
               StructureConstraints(colspace=np.zeros((d, 0))), init=init)
    Xc, _ = _prepare(X, fam, opts)
    p = fit0.params
    _, _, _, gl = _Smooth(Xc, fam).full(p.alpha, p.theta, np.zeros_like(Xc))
    w = np.linalg.eigvalsh(gl @ gl.T)[::-1]
    s = np.sqrt(np.maximum(w[:2], 0.0))
    if s.size < 2:
        s = np.append(s, 0.0)
    return s, fit0


def gamma_bracket(s, num: int, floor: float = 0.9) -> np.ndarray:
    """``num`` descending values from just below ``s[0]`` down to ``floor * s[1]``."""
    lo = floor * s[1]
    f = np.arange(1, num + 1) / num
    return s[0] - f * (s[0] - lo)


@dataclass
class TrialResult:
    seed: int
    success: bool
    lam: Optional[float] = None
    gamma: Optional[float] = None
    fits: int = 0
    converged_fits: List[FitResult] = field(default_factory=list, repr=False)
    kkt: List[dict] = field(default_factory=list, repr=False)


def grid_search(X, fam, truth_theta, truth_rank: int, lams: Sequence[float], n_gamma: int,
                opts: Optional[SolveOptions] = None, stop_at_success: bool = True,
                keep_fits: bool = False) -> TrialResult:
    """Scan lambda (descending) and the per-lambda gamma bracket (descending)."""
    fam = family(fam)
    opts = opts or SolveOptions()
    out = TrialResult(seed=-1, success=False)
    init0 = None
    init = None
    for lam in lams:
        s, fit0 = latent_entry_points(X, fam, lam, opts, init0)
        init0 = fit0.params
        for g in gamma_bracket(s, n_gamma):
            res = fit(X, fam, PenaltyConfig(float(lam), float(g)), opts, init=init)
            init = res.params
            out.fits += 1
            if res.converged:
                if keep_fits:
                    out.converged_fits.append(res)
                out.kkt.append(kkt_check(res, X))
            if recovery_success(res, truth_theta, truth_rank):
                if not out.success:
                    out.success, out.lam, out.gamma = True, float(lam), float(g)
                if stop_at_success:
                    return out
    return out


def run_recovery_trial(spec: TruthSpec, n: int, seed: int, lams=None, n_gamma: int = 10,
                       c1=(1.0, 8.0), n_lambda: int = 10, opts: Optional[SolveOptions] = None,
                       threads: int = 1, **kw) -> TrialResult:
    """Draw a seeded truth and data set, then search the grid for exact recovery."""
    truth = make_truth(spec, seed)
    X = sample(spec, truth.theta, truth.B, n, seed=seed, alpha=truth.alpha, threads=threads)
    if lams is None:
        lams = lambda_grid(spec.d, n, c1[0], c1[1], n_lambda)
    out = grid_search(X, spec.family, truth.theta, spec.r, lams, n_gamma, opts, **kw)
    out.seed = seed
    return out


def sweep(spec: TruthSpec, ns: Sequence[int], trials: int, seed: int = 0, **kw) -> List[dict]:
    """Recovery frequency per sample size; one row per n."""
    rows = []
    for n in ns:
        wins = 0
        for t in range(trials):
            res = run_recovery_trial(spec, int(n), seed * 100003 + t, **kw)
            wins += res.success
        rows.append(dict(family=spec.family.kind, graph=spec.graph, r=spec.r, d=spec.d,
                         n=int(n), trials=trials, successes=wins, frequency=wins / trials))
    return rows


def rows_to_csv(rows: List[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
