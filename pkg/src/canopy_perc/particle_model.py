"""The Poisson particle model on T_n.

Each leaf emits Po(lambda/2) particles.  A particle performs simple random
walk on T_n until it first returns to the leaf layer, and contributes one edge
between its start and its end.

Two walk samplers are provided.  ``NAIVE`` moves step by step.  ``EXACT``
uses the fact that, given the maximal height H reached, the endpoint is uniform
among the leaves below the start's height-H ancestor; H itself satisfies
P(H >= h) = (b-1) / (b**h - 1) for h < n.
"""
from __future__ import annotations

import numpy as np

from .group_tree import LeafAddress, leaf_from_int
from .multigraph import RootedMultiGraph

NAIVE = "naive"
EXACT = "exact"


def _check(n: int, b: int) -> None:
    if n < 1:
        raise ValueError("tree height n must be >= 1")
    if b < 2:
        raise ValueError("branching factor must be >= 2")


def max_height_tail(h: int, n: int, b: int = 2) -> float:
    """P(H >= h) for a walk from a leaf of T_n."""
    if h <= 1:
        return 1.0
    if h > n:
        return 0.0
    return (b - 1) / (b**h - 1)


def max_height_pmf(n: int, b: int = 2) -> np.ndarray:
    """Array p with p[h] = P(H = h), h = 0..n (p[0] = 0)."""
    tail = np.array([max_height_tail(h, n, b) for h in range(n + 2)], dtype=float)
    pmf = tail[:-1] - tail[1:]
    pmf[0] = 0.0
    return pmf


def endpoint_probability(k: int, n: int | None, b: int = 2) -> float:
    """P_n[x -> y] for leaves with lca height k (k = 1 when x = y); n=None for T_inf."""
    if k < 1:
        raise ValueError("k must be >= 1 (use k = 1 for x = y)")
    if n is None:
        from .walk_constants import zeta

        return zeta(k, b)
    if k > n:
        raise ValueError("lca height exceeds tree height")
    pmf = max_height_pmf(n, b)
    return float(sum(pmf[h] * float(b) ** (-h) for h in range(k, n + 1)))


def _walk_exact(starts: np.ndarray, n: int, b: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    cdf = np.cumsum(max_height_pmf(n, b))
    cdf[-1] = 1.0
    H = np.searchsorted(cdf, rng.random(len(starts)), side="right")
    H = np.clip(H, 1, n)
    block = np.power(np.int64(b), H)
    ends = (starts // block) * block + rng.integers(0, block)
    return ends, H


def _walk_naive(starts: np.ndarray, n: int, b: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    # position of an active walker: vertex index within its height level
    pos = starts // b
    height = np.ones(len(starts), dtype=np.int64)
    top = height.copy()
    ends = np.empty_like(starts)
    active = np.arange(len(starts))
    p_up = 1.0 / (b + 1)
    while len(active):
        h = height[active]
        up = (h < n) & (rng.random(len(active)) < p_up)
        down = ~up
        a_up, a_down = active[up], active[down]
        pos[a_up] //= b
        height[a_up] += 1
        pos[a_down] = pos[a_down] * b + rng.integers(0, b, size=len(a_down))
        height[a_down] -= 1
        np.maximum(top, height, out=top)
        done = height[active] == 0
        ends[active[done]] = pos[active[done]]
        active = active[~done]
    return ends, top


def walk_endpoints(starts, n: int, b: int = 2, rng: np.random.Generator | None = None,
                   method: str = EXACT) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints and maximal heights for walks started at interned leaves ``starts``."""
    _check(n, b)
    rng = np.random.default_rng() if rng is None else rng
    starts = np.asarray(starts, dtype=np.int64)
    if len(starts) and (starts.min() < 0 or starts.max() >= b**n):
        raise ValueError("start is not a leaf of T_n")
    if method == EXACT:
        return _walk_exact(starts, n, b, rng)
    if method == NAIVE:
        return _walk_naive(starts, n, b, rng)
    raise ValueError(f"unknown walk method {method!r}")


def sample_walk_endpoint(x: LeafAddress, n: int, b: int = 2, rng: np.random.Generator | None = None,
                         method: str = EXACT) -> LeafAddress:
    if x.b != b or x.ell > n:
        raise ValueError(f"{x} is not a leaf of T_{n} over base {b}")
    ends, _ = walk_endpoints([x.to_int()], n, b, rng, method)
    return leaf_from_int(int(ends[0]), b)


def sample_particle_edges(n: int, lam: float, b: int, rng: np.random.Generator,
                          method: str = EXACT) -> tuple[np.ndarray, np.ndarray]:
    """All particles' (start, end) pairs, self-returns included."""
    _check(n, b)
    if not lam >= 0:
        raise ValueError("lambda must be nonnegative")
    V = b**n
    counts = rng.poisson(lam / 2.0, size=V)
    starts = np.repeat(np.arange(V, dtype=np.int64), counts)
    ends, _ = walk_endpoints(starts, n, b, rng, method)
    return starts, ends


def sample_particle_graph(n: int, lam: float, b: int = 2, rng: np.random.Generator | None = None,
                          method: str = EXACT) -> RootedMultiGraph:
    """Particle-model graph on the b**n leaves; self-returning particles add no edge."""
    rng = np.random.default_rng() if rng is None else rng
    starts, ends = sample_particle_edges(n, lam, b, rng, method)
    return RootedMultiGraph.from_edges(b**n, starts, ends, 0, labels=np.arange(b**n))


def estimate_hit_prob(x: LeafAddress, y: LeafAddress, n: int, b: int = 2, N: int = 100_000,
                      rng: np.random.Generator | None = None, method: str = NAIVE) -> tuple[float, float]:
    """Monte Carlo P_n[x -> y] with its binomial standard error."""
    if N < 1:
        raise ValueError("N must be >= 1")
    for leaf in (x, y):
        if leaf.b != b or leaf.ell > n:
            raise ValueError(f"{leaf} is not a leaf of T_{n}")
    ends, _ = walk_endpoints(np.full(N, x.to_int(), dtype=np.int64), n, b, rng, method)
    p = float(np.count_nonzero(ends == y.to_int())) / N
    return p, float(np.sqrt(max(p * (1 - p), 1e-300) / N))
