"""Ground-truth latent-variable models and samplers.

A truth consists of a sparse interaction matrix on a cycle or Erdos-Renyi
graph, a d x r loading matrix B with prescribed singular values and low
coherence, and a latent law for z. Observations are drawn from x | z with
natural parameters (alpha + Bz, Theta): exactly for the Gaussian family and
by systematic-scan Gibbs sampling otherwise.

Sampling is split into fixed-size blocks of samples, each driven by its own
``SeedSequence`` child keyed by the block index, so the output does not
depend on how many threads process the blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from .data import DataMatrix
from .errors import RejectionBudgetError, SamplerError
from .families import FamilySpec, family, is_feasible

GRAPHS = ("cycle", "erdos_renyi")
LATENT_LAWS = ("rademacher", "standard_normal", "exponential_mean1")

# singular values of B used in the reference experiments, by family and r
REFERENCE_SINGULAR_VALUES = {
    "gaussian": {1: (0.72,), 2: (0.7, 0.7), 3: (0.68, 0.68, 0.68)},
    "ising": {1: (0.72,), 2: (0.7, 0.7), 3: (0.68, 0.68, 0.68)},
    "poisson": {1: (2.0,), 2: (1.95, 1.95), 3: (1.9, 1.9, 1.9)},
    "exponential": {1: (2.0,), 2: (1.95, 1.95), 3: (1.9, 1.9, 1.9)},
}

REFERENCE_LATENT_LAW = {
    "gaussian": "rademacher",
    "ising": "standard_normal",
    "poisson": "rademacher",
    "exponential": "exponential_mean1",
}

BLOCK_SIZE = 1024
POISSON_LOG_RATE_CAP = 30.0


@dataclass
class TruthSpec:
    family: FamilySpec
    d: int
    graph: str = "cycle"
    edge_prob: float = 0.02
    edge_weight: float = 0.4
    r: int = 1
    singular_values: Tuple[float, ...] = (0.72,)
    coherence_target: float = 1.2
    latent_law: str = "rademacher"
    alpha_value: float = 0.0

    def __post_init__(self):
        self.family = family(self.family)
        self.singular_values = tuple(float(s) for s in self.singular_values)
        if self.graph not in GRAPHS:
            raise ValueError(f"graph must be one of {GRAPHS}")
        if self.latent_law not in LATENT_LAWS:
            raise ValueError(f"latent_law must be one of {LATENT_LAWS}")
        if not 0 <= self.r < self.d:
            raise ValueError("need 0 <= r < d")
        if len(self.singular_values) != self.r:
            raise ValueError("one singular value per latent variable is required")
        if self.family.kind == "exponential":
            if self.edge_weight < 0 or self.alpha_value >= 0:
                raise ValueError("exponential truth needs edge_weight >= 0 and alpha_value < 0")
        if self.family.kind == "poisson" and self.edge_weight < 0:
            raise ValueError("poisson truth needs edge_weight >= 0")

    @classmethod
    def reference(cls, kind: str, d: int, r: int, graph: str = "cycle", edge_prob: float = 0.02):
        """The reference experimental setup for ``kind`` at size (d, r)."""
        exp = kind == "exponential"
        return cls(
            family=family(kind),
            d=d,
            graph=graph,
            edge_prob=edge_prob,
            edge_weight=1.0 if exp else 0.4,
            r=r,
            singular_values=REFERENCE_SINGULAR_VALUES[kind][r] if r else (),
            latent_law=REFERENCE_LATENT_LAW[kind],
            alpha_value=-1.0 if exp else 0.0,
        )


@dataclass
class Truth:
    spec: TruthSpec
    alpha: np.ndarray
    theta: np.ndarray
    B: np.ndarray
    seed: Optional[int] = None

    @property
    def edges(self):
        i, j = np.nonzero(np.triu(self.theta != 0, k=1))
        return frozenset(zip(i.tolist(), j.tolist()))


def _rng(seed, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def graph_edges(spec: TruthSpec, seed=None):
    d = spec.d
    if spec.graph == "cycle":
        if d < 3:
            return sorted({(0, 1)}) if d == 2 else []
        return sorted(tuple(sorted((i, (i + 1) % d))) for i in range(d))
    rng = _rng(seed, 0)
    iu, ju = np.triu_indices(d, k=1)
    keep = rng.random(iu.size) < spec.edge_prob
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def make_theta(spec: TruthSpec, seed=None) -> np.ndarray:
    """Interaction matrix on the spec's graph with constant edge weight."""
    d = spec.d
    theta = np.zeros((d, d))
    for i, j in graph_edges(spec, seed):
        theta[i, j] = theta[j, i] = spec.edge_weight
    if spec.family.is_gaussian:
        np.fill_diagonal(theta, 1.0)
        w = np.linalg.eigvalsh(theta)[0]
        if w <= 0.05:
            theta += (0.05 - w + 0.1) * np.eye(d)
    return theta


def squared_coherence(basis) -> float:
    """Largest squared norm of a projected standard basis vector."""
    basis = np.asarray(basis, dtype=float)
    if basis.ndim == 1:
        basis = basis[:, None]
    if basis.shape[1] == 0:
        return 0.0
    return float(np.max(np.sum(basis * basis, axis=1)))


def haar_orthonormal(d: int, r: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(d, r)))
    return Q * np.sign(np.diag(R))


def _polar(A: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(A, full_matrices=False)
    return U @ Vt


def incoherent_basis(
    d: int, r: int, rng: np.random.Generator, upper: float, max_draws: int = 10000,
    refine_steps: int = 50,
) -> np.ndarray:
    """Random orthonormal d x r basis with squared coherence at most ``upper``.

    Each draw starts from a Haar basis; if it is too coherent, rows whose
    squared norm exceeds ``upper`` are shrunk and the basis re-orthonormalized
    (polar factor), repeating until it lands in the band. Plain rejection of
    Haar draws is hopeless for moderate d (the acceptance probability at
    d = 60, r = 1 is about 1e-6).
    """
    cap = math.sqrt(upper)
    for _ in range(max_draws):
        Q = haar_orthonormal(d, r, rng)
        for _ in range(refine_steps + 1):
            if squared_coherence(Q) <= upper:
                return Q
            norms = np.linalg.norm(Q, axis=1)
            shrink = np.minimum(1.0, 0.98 * cap / np.maximum(norms, 1e-300))
            Q = _polar(Q * shrink[:, None])
    raise RejectionBudgetError(
        f"no basis with squared coherence <= {upper:g} after {max_draws} draws (d={d}, r={r})"
    )


def make_loading(spec: TruthSpec, seed=None, max_draws: int = 10000) -> np.ndarray:
    """Loading matrix B = Q diag(s) R' with low-coherence column space.

    The coherence band is [r/d, 1.44 * target * r/d] in squared-coherence
    units. For the exponential family B must be entrywise nonpositive; the
    columns of Q are then given disjoint supports (so that -|Q| keeps
    orthonormal columns and B keeps its singular values) and R = I.
    """
    d, r = spec.d, spec.r
    if r == 0:
        return np.zeros((d, 0))
    rng = _rng(seed, 1)
    s = np.asarray(spec.singular_values, dtype=float)
    upper = min(1.0, 1.44 * spec.coherence_target * r / d)
    if spec.family.kind == "exponential":
        Q = _nonnegative_basis(d, r, rng, upper)
        return -(Q * s)
    Q = incoherent_basis(d, r, rng, upper, max_draws=max_draws)
    R = haar_orthonormal(r, r, rng)
    return (Q * s) @ R.T


def _nonnegative_basis(d: int, r: int, rng: np.random.Generator, upper: float) -> np.ndarray:
    groups = np.array_split(rng.permutation(d), r)
    Q = np.zeros((d, r))
    for c, rows in enumerate(groups):
        best = None
        for _ in range(200):
            v = np.abs(incoherent_basis(len(rows), 1, rng, min(1.0, upper * d / len(rows)))[:, 0])
            if best is None or v.max() < best.max():
                best = v
            if np.max(v * v) <= upper:
                break
        Q[rows, c] = best / np.linalg.norm(best)
    return Q


def make_truth(spec: TruthSpec, seed=None) -> Truth:
    theta = make_theta(spec, seed)
    B = make_loading(spec, seed)
    alpha = np.full(spec.d, float(spec.alpha_value))
    return Truth(spec, alpha, theta, B, seed)


def draw_latents(law: str, r: int, n: int, rng: np.random.Generator) -> np.ndarray:
    if law == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=(r, n))
    if law == "standard_normal":
        return rng.normal(size=(r, n))
    if law == "exponential_mean1":
        return rng.exponential(1.0, size=(r, n))
    raise ValueError(f"unknown latent law {law!r}")


def default_burn_in(d: int) -> int:
    return 200 * d


def default_thin(d: int) -> int:
    return 10 * d


def sample(
    spec: TruthSpec,
    theta,
    B,
    n: int,
    burn_in: Optional[int] = None,
    thin: Optional[int] = None,
    seed=None,
    alpha=None,
    chains: Optional[int] = None,
    threads: int = 1,
) -> DataMatrix:
    """Draw n observations from the latent-variable model.

    Non-Gaussian families use vectorized systematic-scan Gibbs chains.
    ``burn_in`` and ``thin`` count single-site updates (rounded up to whole
    sweeps). By default every sample gets its own chain, started fresh and
    run for ``burn_in`` updates under its own latent draw. With ``chains``
    smaller than the block size, each chain yields several samples: between
    kept samples the latent vector is redrawn and ``thin`` updates are run.
    """
    fam = spec.family
    d = spec.d
    theta = np.asarray(theta, dtype=float)
    B = np.zeros((d, 0)) if B is None else np.asarray(B, dtype=float)
    alpha = np.full(d, float(spec.alpha_value)) if alpha is None else np.asarray(alpha, dtype=float)
    burn_in = default_burn_in(d) if burn_in is None else int(burn_in)
    thin = default_thin(d) if thin is None else int(thin)
    if burn_in < 0 or thin < 1:
        raise ValueError("need burn_in >= 0 and thin >= 1")
    _check_truth(fam, alpha, theta, B, spec.latent_law)
    starts = list(range(0, n, BLOCK_SIZE))

    def run(b):
        m = min(BLOCK_SIZE, n - starts[b])
        return _sample_block(fam, alpha, theta, B, spec.latent_law, m, burn_in, thin, chains, _rng(seed, 2, b))

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(threads) as ex:
            blocks = list(ex.map(run, range(len(starts))))
    else:
        blocks = [run(b) for b in range(len(starts))]
    values = np.concatenate(blocks, axis=1) if blocks else np.zeros((d, 0))
    return DataMatrix(values)


def _check_truth(fam, alpha, theta, B, law):
    ok = is_feasible(fam, alpha, theta)
    if ok and fam.kind == "exponential" and B.size:
        # nonpositive loadings on nonnegative latents never raise alpha
        ok = law == "exponential_mean1" and bool(np.all(B <= 0))
    if not ok:
        raise SamplerError(f"truth parameters are infeasible for the {fam.kind} family")


def _sample_block(fam, alpha, theta, B, law, m, burn_in, thin, chains, rng):
    d = theta.shape[0]
    r = B.shape[1]
    if fam.is_gaussian:
        z = draw_latents(law, r, m, rng)
        eff = alpha[:, None] + B @ z
        chol = linalg.cholesky(theta, lower=True)
        mean = linalg.cho_solve((chol, True), eff)
        noise = linalg.solve_triangular(chol.T, rng.normal(size=(d, m)), lower=False)
        return mean + noise
    k = m if chains is None else max(1, min(int(chains), m))
    rounds = -(-m // k)
    off = theta - np.diag(np.diag(theta))
    x = _initial_state(fam, d, k, rng)
    out = np.empty((d, rounds * k))
    for rd in range(rounds):
        z = draw_latents(law, r, k, rng)
        eff = alpha[:, None] + B @ z
        updates = burn_in if rd == 0 else thin
        for _ in range(-(-updates // d)):
            _sweep(fam, eff, off, x, rng)
        out[:, rd * k:(rd + 1) * k] = x
    return out[:, :m]


def _initial_state(fam, d, k, rng):
    if fam.kind == "ising":
        return rng.choice(np.array([-1.0, 1.0]), size=(d, k))
    if fam.kind == "poisson":
        return np.zeros((d, k))
    return rng.exponential(1.0, size=(d, k))


def _sweep(fam, eff, off, x, rng):
    kind = fam.kind
    for i in range(x.shape[0]):
        u = eff[i] - off[i] @ x
        if kind == "ising":
            p = 0.5 * (1.0 + np.tanh(u))
            x[i] = np.where(rng.random(u.size) < p, 1.0, -1.0)
        elif kind == "poisson":
            if np.any(u > POISSON_LOG_RATE_CAP):
                raise SamplerError(f"Poisson conditional rate exceeds exp({POISSON_LOG_RATE_CAP:g})")
            x[i] = rng.poisson(np.exp(u))
        else:
            if np.any(u >= 0):
                raise SamplerError("exponential conditional rate is not positive")
            x[i] = rng.exponential(-1.0 / u)
