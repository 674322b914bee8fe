"""
Support recovery along the penalty grid
=======================================

Sweeping c2 traces a ROC curve: large values select nothing, small ones
select every available predecessor.
"""

# %%
from lance import TrueModelSpec, generate_truth, roc_sweep, sample_data
from lance.simulation import roc_auc

truth = generate_truth(TrueModelSpec(2, 100, (0.4, 0.6), seed=3))
X = sample_data(truth, 100, seed=4)
points, builds = roc_sweep(X, truth)
print("profiles computed:", builds)

# %%
for c2, sens, spec in points[::10]:
    print(f"c2 {c2:6.3f}  sensitivity {sens:.3f}  specificity {spec:.3f}")
print("area under the curve:", round(roc_auc(points), 4))
