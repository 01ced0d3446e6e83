"""Recover a cycle graph and one latent direction from Ising data.

Draws a d=20 cycle with weight 0.4 and a rank-one latent effect, samples by
Gibbs, then walks a small (lambda, gamma) grid until the fitted support and
rank both match the truth.
"""

import numpy as np

from lvgm import PenaltyConfig, TruthSpec, fit, make_truth, sample
from lvgm.experiment import gamma_bracket, lambda_grid, latent_entry_points
from lvgm.metrics import fdr_pwr, recovery_success

spec = TruthSpec.reference("ising", 20, 1)
truth = make_truth(spec, seed=0)
X = sample(spec, truth.theta, truth.B, 5000, seed=0)
print("data:", X.d, "variables x", X.n, "samples")
print("true edges:", len(truth.edges))

found = None
for lam in lambda_grid(spec.d, X.n, 0.8, 2.4, 10):
    s, _ = latent_entry_points(X, "ising", lam)  # where a latent direction can enter
    for gam in gamma_bracket(s, 10):
        res = fit(X, "ising", PenaltyConfig(lam, gam))
        fdr, pwr = fdr_pwr(res.support, truth.edges)
        print(f"lambda {lam:.4f} gamma {gam:.4f}  edges {len(res.support):3d}  rank {res.rank}  fdr {fdr:.2f} pwr {pwr:.2f}")
        if recovery_success(res, truth.theta, spec.r):
            found = res
            break
    if found is not None:
        break

if found is None:
    print("no grid point recovered the structure")
else:
    print("exact recovery at lambda", found.penalty.lam, "gamma", found.penalty.gamma)
    # the estimated latent direction against the true one
    u = found.L_basis[:, 0]
    b = truth.B[:, 0] / np.linalg.norm(truth.B[:, 0])
    print("|cos| between latent directions: %.3f" % abs(u @ b))
