"""Connectivity thresholds of the edge model and the particle model.

For the edge model both "connected" and "no isolated vertex" switch on near
n log b.  In the particle model isolated vertices disappear first, and
connectivity needs lambda close to sigma_crit * n.  Every replicate is sampled
once at the top of the bracket with uniform edge marks, so each replicate has
an exact critical lambda and the bisection reads all probes off the same data.

Run: python demos/connectivity_thresholds.py   (about a minute)
"""
import math

from canopy_perc import experiments as ex
from canopy_perc.walk_constants import sigma_crit

b = 2
for n in (6, 8, 10):
    est = ex.crossing_estimates(ex.EDGE, n, b, 0.5, 300, seed=n)
    c, i = est[ex.CONNECTED], est[ex.NO_ISOLATED]
    print(f"edge     n={n:<2} connected {c.lambda_star:6.2f} +- {c.se:.2f}   "
          f"no isolated {i.lambda_star:6.2f} +- {i.se:.2f}   n log b = {n * math.log(b):.2f}")

for n in (6, 8, 10):
    est = ex.crossing_estimates(ex.PARTICLE, n, b, 0.5, 300, seed=n)
    c, i = est[ex.CONNECTED], est[ex.NO_ISOLATED]
    print(f"particle n={n:<2} connected {c.lambda_star:6.2f} +- {c.se:.2f}   "
          f"no isolated {i.lambda_star:6.2f} +- {i.se:.2f}   sigma_crit n = {sigma_crit(b) * n:.2f}")

# a sweep over a grid, summarised per lambda
for pt in ex.sweep_connectivity(ex.EDGE, 8, [3, 4, 5, 6, 7, 8, 9], b, N=200, seed=3):
    print(f"lambda={pt.lam:<4g} P(connected)={pt.p_connected:.3f}  P(no isolated)={pt.p_no_isolated:.3f}")
