"""The Gaussian estimator does not need the n x d latent matrix.

Fitting the full problem carries a d x n matrix L; the reduced problem only
carries a d x d matrix H. Both give the same Theta, and the full-size L is
rebuilt from H and the singular vectors of the data.
"""

import time

import numpy as np

from lvgm import PenaltyConfig, TruthSpec, fit, make_truth, sample
from lvgm.reduced import fit_gaussian_reduced

spec = TruthSpec.reference("gaussian", 15, 2)
truth = make_truth(spec, seed=0)
cfg = PenaltyConfig(0.05, 0.012)

for n in (500, 5000, 20000):
    X = sample(spec, truth.theta, truth.B, n, seed=n)
    t0 = time.time()
    full = fit(X, "gaussian", cfg)
    t1 = time.time()
    red = fit_gaussian_reduced(X, cfg)
    t2 = time.time()
    gap = np.linalg.norm(full.theta - red.theta)
    print(f"n={n:6d}  full {t1 - t0:6.2f}s  reduced {t2 - t1:6.2f}s  |dTheta| {gap:.1e}"
          f"  objectives {full.objective:.8f} {red.objective:.8f}  rank {full.rank}/{red.rank}")
