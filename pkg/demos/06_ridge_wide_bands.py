"""
Bandwidths wider than the sample size
=====================================

The exact prior needs invertible Gram matrices, so bandwidths stay below
n.  A ridge term in the coefficient prior lifts that restriction.
"""

# %%
import numpy as np

from lance import Hyperparameters, ridge_fit, select_bandwidths

rng = np.random.default_rng(7)
n, p = 15, 40
X = np.cumsum(rng.standard_normal((n, p)), axis=1) / np.sqrt(np.arange(1, p + 1))

fit = ridge_fit(X, Hyperparameters(ridge_c=1.0, c2=0.5, rmax=25))
print("largest bandwidth considered:", fit.posteriors[-1].log_weights.size - 1, "with n =", n)
print("selected bandwidths:", fit.bandwidths)

# %%
# With a tiny ridge constant and bandwidths below n the two fits agree.
small = Hyperparameters(ridge_c=1e-8, c2=0.5, rmax=5)
exact = select_bandwidths(X, small.replace(ridge_c=0.0))
print("same bandwidths as the exact prior:",
      np.array_equal(ridge_fit(X, small).bandwidths, exact.bandwidths))
