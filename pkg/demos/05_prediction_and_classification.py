"""
Prediction and classification
=============================

A fitted factor gives the best linear predictor of a variable from its
predecessors directly, and its log determinant and quadratic form feed a
quadratic discriminant.
"""

# %%
import numpy as np

from lance import fit_qda, prediction_error_table, qda_classify
from lance.applications import fit_lance
from lance.model import DataMatrix

rng = np.random.default_rng(0)
p, rho = 40, 0.7
idx = np.arange(p)
L = np.linalg.cholesky(rho ** np.abs(idx[:, None] - idx[None, :]))
train = DataMatrix(rng.standard_normal((60, p)) @ L.T).center()
test = rng.standard_normal((300, p)) @ L.T - train.means

fit, cv = fit_lance(train.values)
print("CV chose c2 =", round(cv.c2_best, 3), " bandwidths:", np.unique(fit.bandwidths))

# %%
# Predict the second half of the variables from the first half.  The sample
# covariance plug-in is the naive competitor.
lance_pe = prediction_error_table(fit.model, np.zeros(p), test, p // 2)
plugin = np.linalg.inv(np.cov(train.values, rowvar=False))
plugin_pe = prediction_error_table(plugin, np.zeros(p), test, p // 2)
print(f"mean absolute error  banded {lance_pe.mean:.4f}   plug-in {plugin_pe.mean:.4f}")

# %%
# Two classes of smooth series that differ in their dependence.
def series(n, step):
    return np.cumsum(step * rng.standard_normal((n, 30)), axis=1)

X = np.vstack([series(50, 0.3), series(50, 0.6)])
y = np.repeat([1, 2], 50)
model = fit_qda(X, y, c2=0.5)
Xt = np.vstack([series(100, 0.3), series(100, 0.6)])
yt = np.repeat([1, 2], 100)
pred, scores = qda_classify(model, Xt)
print("test error:", np.mean(pred != yt))
