"""Walk constants on the canopy tree and a Monte Carlo look at them.

A particle started at a leaf walks until it first returns to the leaf layer.
zeta_h is the chance that it lands on one fixed leaf at lca height h; Xi_k sums
those chances over everything outside the k-neighbourhood.  The thresholds
sigma_k = log(b) / Xi_k decrease towards sigma_crit = (b+1)/(b-1) log b.

Run: python demos/walk_constants.py
"""
import numpy as np

from canopy_perc.particle_model import EXACT, walk_endpoints
from canopy_perc.walk_constants import WalkConstants, sigma_crit, xi_inf, zeta

b = 2
print("h   zeta_h         b^(2h) zeta_h")
for h in range(1, 9):
    print(f"{h:<3} {zeta(h, b):.10f}  {b ** (2 * h) * zeta(h, b):.6f}")

print("\nk   Xi_k           sigma_k")
wc = WalkConstants(b)
for k in range(0, 9):
    print(f"{k:<3} {xi_inf(k, b):.10f}  {wc.sigma(k):.6f}")
print(f"limit (b-1)/(b+1) = {(b - 1) / (b + 1):.10f}, sigma_crit = {sigma_crit(b):.6f}")

# sibling hit rate from a tall finite tree, which matches the infinite tree to ~1e-8
N = 400_000
rng = np.random.default_rng(1)
ends, top = walk_endpoints(np.zeros(N, dtype=np.int64), 20, b, rng, EXACT)
p = np.mean(ends == 1)
print(f"\nMonte Carlo sibling hit rate {p:.4f} +- {np.sqrt(p * (1 - p) / N):.4f}  (zeta_1 = {zeta(1, b):.4f})")
print(f"mean maximal height of the walk {top.mean():.3f}")
