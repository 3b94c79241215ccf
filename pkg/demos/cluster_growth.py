"""The identity's cluster in the infinite edge model.

Exploration is an exact lazy breadth-first search.  The mean cluster size
chi(lambda) grows very fast and becomes heavy tailed: by lambda = 5 a large
share of explorations exceeds a million vertices, and the estimator refuses.

Run: python demos/cluster_growth.py   (about a minute)
"""
import numpy as np

from canopy_perc import experiments as ex
from canopy_perc.edge_model import explore_infinite_cluster, geogeo_bound

trend = ex.chi_trend([1, 2, 3], N=400, seed=1)
for lam, m, s in zip(trend.lams, trend.means, trend.ses):
    print(f"chi({lam:g}) = {m:8.2f} +- {s:.2f}")
print(f"slope of log chi against lambda: {trend.slope:.2f} +- {trend.slope_se:.2f}")

rng = np.random.default_rng(2)
levels = np.array([explore_infinite_cluster(1.0, 2, rng).escaped_level for _ in range(5000)])
for n in range(1, 7):
    print(f"P(cluster leaves L_{n}) = {np.mean(levels > n):.3f}   bound {geogeo_bound(1.0, n):.3f}")

try:
    ex.estimate_chi(5.0, 2, N=30, seed=0, cap=10**5)
except ex.EstimatorRefused as err:
    print(f"lambda=5: {err}")
