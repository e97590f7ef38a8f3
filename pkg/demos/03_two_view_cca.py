"""Two views: MAXVAR MCCA reaches the classical CCA optimum.

With M = 2 the shared direction found by MCCA projects each view onto its
first canonical variate, so the correlation between the two projected
views equals the first canonical correlation.
"""

import numpy as np

from mccaspeech.decomp import cca2, fit_mcca

rng = np.random.default_rng(3)
common = rng.standard_normal((40, 1))
x1 = np.hstack([common + 0.3 * rng.standard_normal((40, 1)), rng.standard_normal((40, 2))])
x2 = np.hstack([rng.standard_normal((40, 1)), common + 0.5 * rng.standard_normal((40, 1)), rng.standard_normal((40, 1))])

u1, u2, rho = cca2(x1, x2, 3, epsilon=1e-10)
print("canonical correlations:", np.round(rho, 6))

model = fit_mcca([x1, x2], 1, epsilon=1e-10)
a = x1 @ model.projectors[0][:, 0]
b = x2 @ model.projectors[1][:, 0]
print("correlation reached by MCCA (M=2):", round(float(a @ b / np.linalg.norm(a) / np.linalg.norm(b)), 6))
print("eigenvalue = 1 + rho_1:", round(float(model.eigenvalues[0]), 6))
