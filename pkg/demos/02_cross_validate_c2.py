"""
Choosing the penalty by cross-validation
========================================

The log predictive density on held-out halves is evaluated over a grid of
c2 values.  Column profiles are computed once per split and reused for
every grid point.
"""

# %%
import numpy as np

from lance import TrueModelSpec, generate_truth, lpd_cv, sample_data

truth = generate_truth(TrueModelSpec(1, 80, (0.1, 0.4), seed=5))
X = sample_data(truth, 200, seed=6)

cv = lpd_cv(X, n_cv=5, seed=0)
print("chosen c2:", round(cv.c2_best, 4))
print("profile builds:", cv.n_profile_builds, "for", cv.c2_grid.size, "grid points")

# %%
# A coarse look at the curve.  The maximum sits in the interior: small c2
# admits spurious predecessors, large c2 drops the weak true ones.
for c2, v in cv.table()[::11]:
    print(f"c2 = {c2:6.3f}   lpd = {v:10.2f}")

# %%
best = int(np.argmax(cv.lpd))
print("lpd range:", cv.lpd.min().round(1), "to", cv.lpd[best].round(1))
