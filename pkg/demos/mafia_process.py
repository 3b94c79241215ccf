"""The mafia process: vertices split at rate 1 and re-wire their edges.

Splitting every vertex at exponential times grows a Yule tree of expected size
e^t.  With lambda new edges per split the graph on its leaves is an
asynchronous version of the edge model.  The root's two edges go to one
neighbour with probability 2/7 in the synchronous model, and noticeably less
often in the stationary asynchronous limit.

Run: python demos/mafia_process.py   (about half a minute)
"""
import math

import numpy as np

from canopy_perc.dynamics import (
    ROOT_COMPONENT,
    double_edge_stat,
    run_mafia,
    sample_async_graph,
    sample_mafia_limit,
    sample_yule_tree,
)
from canopy_perc.edge_model import sample_root_edges
from canopy_perc.multigraph import RootedMultiGraph, union_find_connected

rng = np.random.default_rng(7)
for t in (2.0, 4.0, 6.0):
    leaves = [sample_yule_tree(t, 2, rng).n_leaves for _ in range(2000)]
    print(f"t={t:g}: mean leaves {np.mean(leaves):8.1f}   e^t = {math.exp(t):8.1f}")

t = 8.0
for lam in (4.0, 8.0, 12.0):
    share = np.mean([union_find_connected(g.n_vertices, g.u, g.v)
                     for g, _ in (sample_async_graph(t, lam, 2, rng) for _ in range(50))])
    print(f"t={t:g} lambda={lam:g}: P(connected) ~ {share:.2f}")

sizes = [run_mafia(RootedMultiGraph.from_edges(1, [], []), 3.0, 4.0, 2, rng, ROOT_COMPONENT).n_vertices
         for _ in range(200)]
print(f"root component at t=4, lambda=3: mean {np.mean(sizes):.1f} vertices, largest {max(sizes)}")


def sync_star(rng):
    ys = np.asarray([int(y) for y in sample_root_edges(1.0, 2, rng)], dtype=np.int64)
    return RootedMultiGraph.from_edges(len(ys) + 1, np.zeros(len(ys), dtype=np.int64),
                                       1 + np.unique(ys, return_inverse=True)[1].ravel())


p, se, _ = double_edge_stat(sync_star(rng) for _ in range(40_000))
q, se_q, _ = double_edge_stat(sample_mafia_limit(1.0, rng) for _ in range(10_000))
print(f"double edge given degree 2: synchronous {p:.3f} +- {se:.3f} (2/7 = {2 / 7:.3f}), "
      f"asynchronous {q:.3f} +- {se_q:.3f}")
