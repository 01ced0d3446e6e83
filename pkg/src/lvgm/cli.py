"""Command-line interface: ``lvgm generate|fit|select|evaluate|experiment``.

Every subcommand reads a flat ``key = value`` configuration file (``#``
starts a comment). Unknown keys are rejected and every input and output
path is checked before any computation starts.

Exit codes: 0 success, 2 configuration or input error, 3 a fit did not
converge (results are still written, flagged ``converged: false``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional

import numpy as np

from . import jsonio
from .data import read_csv, write_csv
from .errors import ConfigError, DomainError, SubsampleFailureError
from .experiment import rows_to_csv, run_recovery_trial
from .families import KINDS, family
from .metrics import fdr_pwr, holdout_nll, recovery_success
from .prox import PenaltyConfig
from .reduced import fit_gaussian_reduced
from .solver import SolveOptions, StructureConstraints, fit
from .stability import select
from .synth import GRAPHS, LATENT_LAWS, REFERENCE_LATENT_LAW, REFERENCE_SINGULAR_VALUES, TruthSpec, make_truth, sample

log = logging.getLogger("lvgm")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 2, 3


# ---------------------------------------------------------------------------
# typed config keys


def _int(v):
    return int(v)


def _float(v):
    x = float(v)
    if not np.isfinite(x):
        raise ValueError("must be finite")
    return x


def _bool(v):
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _floats(v):
    return [_float(x) for x in v.split(",") if x.strip()]


def _ints(v):
    return [int(x) for x in v.split(",") if x.strip()]


def _choice(options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return parse


def _str(v):
    return v


SOLVER_KEYS = {
    "max_iter": (_int, 5000),
    "tol_rel_obj": (_float, 1e-8),
    "tol_residual": (_float, 1e-5),
    "backtrack_factor": (_float, 0.5),
    "init_step": (_float, 1.0),
    "acceleration": (_bool, True),
    "random_init": (_bool, False),
}

COMMON_KEYS = {
    "family": (_choice(KINDS), None),
    "seed": (_int, 0),
    "threads": (_int, 0),
    "log_level": (_choice(("debug", "info", "warning", "error")), "warning"),
}

TRUTH_KEYS = {
    "d": (_int, None),
    "r": (_int, 1),
    "graph": (_choice(GRAPHS), "cycle"),
    "edge_prob": (_float, 0.02),
    "edge_weight": (_float, None),
    "singular_values": (_floats, None),
    "coherence_target": (_float, 1.2),
    "latent_law": (_choice(LATENT_LAWS), None),
    "alpha_value": (_float, None),
    "burn_in": (_int, None),
    "thin": (_int, None),
    "chains": (_int, None),
}

KEYS: Dict[str, dict] = {
    "generate": {
        **COMMON_KEYS, **TRUTH_KEYS,
        "n": (_int, None),
        "data_out": (_str, None),
        "truth_out": (_str, None),
    },
    "fit": {
        **COMMON_KEYS, **SOLVER_KEYS,
        "data": (_str, None),
        "model_out": (_str, None),
        "lambda": (_float, None),
        "gamma": (_float, None),
        "c1": (_float, None),
        "c2": (_float, None),
        "penalize_diagonal": (_bool, False),
        "center": (_bool, True),
    },
    "select": {
        **COMMON_KEYS, **SOLVER_KEYS,
        "data": (_str, None),
        "report_out": (_str, None),
        "model_out": (_str, None),
        "lambda_grid": (_floats, None),
        "gamma_grid": (_floats, None),
        "num_lambda": (_int, 10),
        "num_gamma": (_int, 10),
        "t_graph": (_float, 0.025),
        "t_latent": (_float, 0.025),
        "delta_graph": (_float, 0.7),
        "delta_latent": (_float, 0.7),
        "num_subsamples": (_int, 50),
        "order": (_choice(("gamma_first", "lambda_first")), "gamma_first"),
    },
    "evaluate": {
        **COMMON_KEYS, **SOLVER_KEYS,
        "model": (_str, None),
        "baseline_model": (_str, None),
        "test_data": (_str, None),
        "truth": (_str, None),
        "metrics_out": (_str, None),
    },
    "experiment": {
        **COMMON_KEYS, **TRUTH_KEYS, **SOLVER_KEYS,
        "ns": (_ints, None),
        "trials": (_int, 10),
        "c1_min": (_float, 1.0),
        "c1_max": (_float, 8.0),
        "n_lambda": (_int, 10),
        "n_gamma": (_int, 10),
        "results_out": (_str, None),
    },
}

REQUIRED = {
    "generate": ("family", "d", "n", "data_out", "truth_out"),
    "fit": ("family", "data", "model_out"),
    "select": ("family", "data", "report_out", "model_out"),
    "evaluate": ("model", "test_data", "metrics_out"),
    "experiment": ("family", "d", "ns", "results_out"),
}

INPUT_PATHS = ("data", "model", "baseline_model", "test_data", "truth")
OUTPUT_PATHS = ("data_out", "truth_out", "model_out", "report_out", "metrics_out", "results_out")


def parse_config_text(text: str, command: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines against the command's schema."""
    schema = KEYS[command]
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in schema:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r} for '{command}'")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    cfg = {}
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                cfg[key] = parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {key!r}: {raw[key]!r} ({exc})") from None
        else:
            cfg[key] = default
    missing = [k for k in REQUIRED[command] if cfg.get(k) is None]
    if missing:
        raise ConfigError(f"{source}: missing required key(s): {', '.join(missing)}")
    return cfg


def load_config(path: str, command: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    cfg = parse_config_text(text, command, path)
    base = os.path.dirname(os.path.abspath(path))
    for key in INPUT_PATHS + OUTPUT_PATHS:
        if cfg.get(key) is not None and not os.path.isabs(cfg[key]):
            cfg[key] = os.path.join(base, cfg[key])
    validate_paths(cfg)
    return cfg


def validate_paths(cfg: dict) -> None:
    for key in INPUT_PATHS:
        p = cfg.get(key)
        if p is not None and not (os.path.isfile(p) and os.access(p, os.R_OK)):
            raise ConfigError(f"{key}: input file {p!r} does not exist or is not readable")
    for key in OUTPUT_PATHS:
        p = cfg.get(key)
        if p is None:
            continue
        parent = os.path.dirname(os.path.abspath(p)) or "."
        if not os.path.isdir(parent):
            raise ConfigError(f"{key}: output directory {parent!r} does not exist")
        if not os.access(parent, os.W_OK) or (os.path.exists(p) and not os.access(p, os.W_OK)):
            raise ConfigError(f"{key}: cannot write {p!r}")


def solve_options(cfg: dict, **extra) -> SolveOptions:
    kw = {k: cfg[k] for k in SOLVER_KEYS if k in cfg}
    kw["seed"] = cfg.get("seed", 0)
    kw.update(extra)
    try:
        return SolveOptions(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def thread_count(cfg: dict) -> int:
    t = cfg.get("threads") or 0
    if t < 0:
        raise ConfigError("threads must be nonnegative (0 means all cores)")
    return t or (os.cpu_count() or 1)


def truth_spec(cfg: dict) -> TruthSpec:
    kind = cfg["family"]
    r = cfg["r"]
    if kind not in REFERENCE_SINGULAR_VALUES:
        raise ConfigError(f"unknown family {kind!r}")
    sv = cfg["singular_values"]
    if sv is None:
        ref = REFERENCE_SINGULAR_VALUES[kind]
        if r == 0:
            sv = ()
        elif r in ref:
            sv = ref[r]
        else:
            raise ConfigError(f"no reference singular values for r={r}; set singular_values")
    exp = kind == "exponential"
    try:
        return TruthSpec(
            family=kind, d=cfg["d"], graph=cfg["graph"], edge_prob=cfg["edge_prob"],
            edge_weight=(1.0 if exp else 0.4) if cfg["edge_weight"] is None else cfg["edge_weight"],
            r=r, singular_values=sv, coherence_target=cfg["coherence_target"],
            latent_law=cfg["latent_law"] or REFERENCE_LATENT_LAW[kind],
            alpha_value=(-1.0 if exp else 0.0) if cfg["alpha_value"] is None else cfg["alpha_value"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(cfg: dict, args) -> int:
    spec = truth_spec(cfg)
    if cfg["n"] <= 0:
        raise ConfigError("n must be positive")
    truth = make_truth(spec, cfg["seed"])
    X = sample(spec, truth.theta, truth.B, cfg["n"], burn_in=cfg["burn_in"], thin=cfg["thin"],
               seed=cfg["seed"], alpha=truth.alpha, chains=cfg["chains"], threads=thread_count(cfg))
    write_csv(cfg["data_out"], X)
    jsonio.save_truth(truth, cfg["truth_out"])
    return EXIT_OK


def _penalty(cfg: dict, d: int, n: int, no_latent: bool) -> PenaltyConfig:
    lam, gam = cfg["lambda"], cfg["gamma"]
    if lam is None:
        if cfg["c1"] is None:
            raise ConfigError("set either lambda or c1")
        lam = cfg["c1"] * np.sqrt(d / n)
    if gam is None:
        if cfg["c2"] is None and not no_latent:
            raise ConfigError("set either gamma or c2")
        gam = 0.0 if cfg["c2"] is None else cfg["c2"] * np.sqrt(d) / n
    try:
        return PenaltyConfig(float(lam), float(gam), cfg["penalize_diagonal"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_fit(cfg: dict, args) -> int:
    X = read_csv(cfg["data"])
    fam = family(cfg["family"])
    pen = _penalty(cfg, X.d, X.n, args.no_latent)
    opts = solve_options(cfg, center=cfg["center"])
    if args.reduced:
        if not fam.is_gaussian:
            raise ConfigError("--reduced applies to the gaussian family only")
        if args.no_latent:
            raise ConfigError("--reduced and --no-latent cannot be combined")
        res = fit_gaussian_reduced(X, pen, opts)
    else:
        cons = StructureConstraints(colspace=np.zeros((X.d, 0))) if args.no_latent else None
        res = fit(X, fam, pen, opts, cons)
    jsonio.save_model(res, cfg["model_out"], X.names)
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_select(cfg: dict, args) -> int:
    X = read_csv(cfg["data"])
    fam = family(cfg["family"])
    opts = solve_options(cfg)
    for key in ("num_subsamples", "num_lambda", "num_gamma"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be positive")
    try:
        out = select(
            X, fam, cfg["lambda_grid"], cfg["gamma_grid"], cfg["t_graph"], cfg["t_latent"],
            cfg["delta_graph"], cfg["delta_latent"], cfg["num_subsamples"], cfg["seed"], opts,
            thread_count(cfg), cfg["num_lambda"], cfg["num_gamma"], cfg["order"],
            no_latent=args.no_latent,
        )
    except SubsampleFailureError as exc:
        log.error("%s", exc)
        return EXIT_NONCONVERGED
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise ConfigError(str(exc)) from None
    report = {
        "stage1": {
            "lambda": out.stage1.lam,
            "gamma": out.stage1.gamma,
            "warning": out.stage1.warning,
            "path": [dict(zip(("lambda", "gamma", "pi_graph", "pi_latent"), p)) for p in out.stage1.path],
        },
        "report": out.stage1.report.to_json(),
        "structure": out.structure.to_json(),
        "refit_converged": bool(out.refit.converged),
    }
    jsonio.dump(report, cfg["report_out"])
    jsonio.save_model(out.refit, cfg["model_out"], X.names)
    return EXIT_OK if out.refit.converged else EXIT_NONCONVERGED


def _load_model(path):
    try:
        return jsonio.load_model(path)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: unreadable model file ({exc})") from None


def cmd_evaluate(cfg: dict, args) -> int:
    model = _load_model(cfg["model"])
    X = read_csv(cfg["test_data"])
    if X.d != model.theta.shape[0]:
        raise ConfigError(f"test data has {X.d} variables, model has {model.theta.shape[0]}")
    opts = solve_options(cfg)
    if args.no_latent:
        model.L_basis = np.zeros((X.d, 0))
    val, hold = holdout_nll(model, X, opts, return_fit=True)
    out = {"holdout_nll": val, "model_rank": int(model.L_basis.shape[1])}
    ok = model.converged and hold.converged
    if cfg["baseline_model"] is not None:
        base = _load_model(cfg["baseline_model"])
        val, hold = holdout_nll(base, X, opts, return_fit=True)
        out["holdout_nll_baseline"] = val
        ok = ok and base.converged and hold.converged
    if cfg["truth"] is not None:
        try:
            truth = jsonio.load_truth(cfg["truth"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"{cfg['truth']}: unreadable truth file ({exc})") from None
        fdr, pwr = fdr_pwr(model.support, truth.edges)
        out.update(fdr=fdr, pwr=pwr, recovery_success=recovery_success(model, truth.theta, truth.spec.r))
    out["converged"] = bool(ok)
    jsonio.dump(out, cfg["metrics_out"])
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_experiment(cfg: dict, args) -> int:
    spec = truth_spec(cfg)
    opts = solve_options(cfg)
    if any(n < 4 for n in cfg["ns"]) or cfg["trials"] < 1:
        raise ConfigError("ns entries must be >= 4 and trials >= 1")
    if not 0 < cfg["c1_min"] <= cfg["c1_max"]:
        raise ConfigError("need 0 < c1_min <= c1_max")
    jobs = [(n, t) for n in cfg["ns"] for t in range(cfg["trials"])]

    def run(job):
        n, t = job
        seed = int(np.random.SeedSequence(cfg["seed"], spawn_key=(n, t)).generate_state(1)[0])
        res = run_recovery_trial(spec, n, seed, c1=(cfg["c1_min"], cfg["c1_max"]),
                                 n_lambda=cfg["n_lambda"], n_gamma=cfg["n_gamma"], opts=opts)
        return n, res

    threads = thread_count(cfg)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    rows = []
    for n in cfg["ns"]:
        wins = sum(r.success for m, r in results if m == n)
        rows.append(dict(family=spec.family.kind, graph=spec.graph, r=spec.r, d=spec.d, n=n,
                         trials=cfg["trials"], successes=wins, frequency=wins / cfg["trials"]))
    with open(cfg["results_out"], "w") as fh:
        fh.write(rows_to_csv(rows))
    return EXIT_OK


COMMANDS: Dict[str, Callable] = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "select": cmd_select,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lvgm", description="Latent-variable graphical models.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="key = value configuration file")
    p.add_argument("--reduced", action="store_true", help="fit: use the reduced Gaussian problem")
    p.add_argument("--no-latent", action="store_true", help="force L = 0")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, args.command)
        logging.basicConfig(level=getattr(logging, cfg["log_level"].upper()),
                            format="%(levelname)s %(name)s: %(message)s")
        if args.reduced and args.command != "fit":
            raise ConfigError("--reduced only applies to 'fit'")
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, DomainError) as exc:
        print(f"lvgm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
