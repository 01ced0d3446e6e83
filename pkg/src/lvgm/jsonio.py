"""JSON files for fitted models and ground-truth models.

Floats are written with Python's shortest round-trip representation, so a
model read back from disk has bitwise-identical parameters. Matrices are
stored flat in row-major order next to their shape. Theta is stored as
upper-triangle triplets ``[i, j, value]`` (diagonal included, zeros omitted)
and L as an orthonormal column-space basis plus coordinates, ``L = basis @
coords``.
"""

from __future__ import annotations

import json
import numpy as np

from .families import ModelParams, family
from .prox import PenaltyConfig
from .solver import FitResult, support_of
from .synth import Truth, TruthSpec

MODEL_FORMAT = "lvgm-model/1"
TRUTH_FORMAT = "lvgm-truth/1"


def _flat(A) -> list:
    return [float(v) for v in np.asarray(A, dtype=float).ravel()]


def _matrix(flat, shape) -> np.ndarray:
    return np.asarray(flat, dtype=float).reshape(shape)


def theta_triplets(theta) -> list:
    theta = np.asarray(theta, dtype=float)
    i, j = np.nonzero(np.triu(theta != 0))
    return [[int(a), int(b), float(theta[a, b])] for a, b in zip(i, j)]


def theta_from_triplets(entries, d: int) -> np.ndarray:
    theta = np.zeros((d, d))
    for i, j, v in entries:
        theta[int(i), int(j)] = theta[int(j), int(i)] = float(v)
    return theta


def model_to_dict(res: FitResult, names=None) -> dict:
    d = res.theta.shape[0]
    basis = res.L_basis if res.L_basis is not None else np.zeros((d, 0))
    coords = res.L_coords if res.L_coords is not None else np.zeros((0, res.L.shape[1] if res.L is not None else 0))
    return {
        "format": MODEL_FORMAT,
        "family": res.family.kind,
        "strict_margin": res.family.strict_margin,
        "d": d,
        "n": int(coords.shape[1]),
        "names": list(names) if names is not None else None,
        "alpha": _flat(res.params.alpha),
        "theta": theta_triplets(res.theta),
        "L": {"rank": int(basis.shape[1]), "basis": _flat(basis), "coords": _flat(coords)},
        "center": None if res.center is None else _flat(res.center),
        "penalty": {
            "lambda": res.penalty.lam,
            "gamma": res.penalty.gamma,
            "penalize_diagonal": res.penalty.penalize_diagonal,
        },
        "diagnostics": {
            "objective": float(res.objective),
            "iterations": int(res.iterations),
            "support_size": len(res.support),
            "rank": int(res.rank),
            "converged": bool(res.converged),
            "status": res.status,
            "residual": None if not np.isfinite(res.residual) else float(res.residual),
        },
    }


def model_from_dict(obj: dict) -> FitResult:
    if obj.get("format") != MODEL_FORMAT:
        raise ValueError(f"not an lvgm model file (format={obj.get('format')!r})")
    fam = family(obj["family"], obj.get("strict_margin", 1e-8))
    d, n = int(obj["d"]), int(obj["n"])
    k = int(obj["L"]["rank"])
    basis = _matrix(obj["L"]["basis"], (d, k))
    coords = _matrix(obj["L"]["coords"], (k, n))
    theta = theta_from_triplets(obj["theta"], d)
    alpha = np.asarray(obj["alpha"], dtype=float)
    pen = obj["penalty"]
    diag = obj["diagnostics"]
    return FitResult(
        params=ModelParams(alpha, theta, basis @ coords),
        objective_trace=[float(diag["objective"])],
        support=support_of(theta),
        rank=k,
        iterations=int(diag["iterations"]),
        converged=bool(diag["converged"]),
        family=fam,
        penalty=PenaltyConfig(float(pen["lambda"]), float(pen["gamma"]), bool(pen["penalize_diagonal"])),
        status=diag.get("status", "converged"),
        residual=float("nan") if diag.get("residual") is None else float(diag["residual"]),
        center=None if obj.get("center") is None else np.asarray(obj["center"], dtype=float),
        L_basis=basis,
        L_coords=coords,
    )


def truth_to_dict(truth: Truth) -> dict:
    spec = truth.spec
    d, r = truth.B.shape
    return {
        "format": TRUTH_FORMAT,
        "family": spec.family.kind,
        "seed": truth.seed,
        "d": d,
        "r": r,
        "graph": spec.graph,
        "edge_prob": spec.edge_prob,
        "edge_weight": spec.edge_weight,
        "singular_values": list(spec.singular_values),
        "coherence_target": spec.coherence_target,
        "latent_law": spec.latent_law,
        "alpha": _flat(truth.alpha),
        "theta": theta_triplets(truth.theta),
        "B": _flat(truth.B),
    }


def truth_from_dict(obj: dict) -> Truth:
    if obj.get("format") != TRUTH_FORMAT:
        raise ValueError(f"not an lvgm truth file (format={obj.get('format')!r})")
    d, r = int(obj["d"]), int(obj["r"])
    alpha = np.asarray(obj["alpha"], dtype=float)
    spec = TruthSpec(
        family=obj["family"], d=d, graph=obj["graph"], edge_prob=obj["edge_prob"],
        edge_weight=obj["edge_weight"], r=r, singular_values=obj["singular_values"],
        coherence_target=obj["coherence_target"], latent_law=obj["latent_law"],
        alpha_value=float(alpha[0]) if d else 0.0,
    )
    return Truth(spec, alpha, theta_from_triplets(obj["theta"], d), _matrix(obj["B"], (d, r)), obj.get("seed"))


def dump(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, allow_nan=False)
        fh.write("\n")


def load(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def save_model(res: FitResult, path, names=None) -> None:
    dump(model_to_dict(res, names), path)


def load_model(path) -> FitResult:
    return model_from_dict(load(path))


def save_truth(truth: Truth, path) -> None:
    dump(truth_to_dict(truth), path)


def load_truth(path) -> Truth:
    return truth_from_dict(load(path))
