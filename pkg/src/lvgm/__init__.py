"""Latent-variable graphical models for Gaussian, Ising, Poisson and exponential data.

The estimator fits node potentials ``alpha``, a sparse interaction matrix
``Theta`` and a low-rank matrix ``L`` of per-sample latent effects by
minimizing a conditional (pseudo-)likelihood with an l1 penalty on Theta and
a nuclear-norm penalty on L.
"""

from .data import DataMatrix, read_csv, write_csv
from .errors import (
    ConfigError,
    DomainError,
    InfeasibleStartError,
    NotPositiveDefiniteError,
    RejectionBudgetError,
    SamplerError,
    SubsampleFailureError,
)
from .families import FamilySpec, ModelParams, family, rho, rho_prime
from .metrics import fdr_pwr, holdout_fit, holdout_nll, recovery_success
from .objective import gaussian_smooth, penalty_value, pseudo_smooth, smooth
from .prox import PenaltyConfig, project_domain, prox_l1_theta, svt
from .reduced import ReducedInstance, fit_gaussian_reduced, fit_reduced, reconstruct_L, reduce
from .solver import (
    FitResult,
    SolveOptions,
    StructureConstraints,
    fit,
    kkt_check,
    lambda_max,
    objective_value,
)
from .stability import (
    SelectedStructure,
    StabilityReport,
    select,
    stage1_select,
    stage2_structure,
    stage3_refit,
    subsample_fit,
)
from .synth import TruthSpec, make_loading, make_theta, make_truth, sample, squared_coherence

__version__ = "0.1.0"
