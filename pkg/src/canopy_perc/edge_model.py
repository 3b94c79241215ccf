"""Samplers for the Poisson edge model and its group-percolation generalisation.

Finite volumes use class aggregation: all unordered leaf pairs with the same
lca height share one edge rate, so the total edge count of a class is a single
Poisson draw and each edge lands on a uniform pair of the class.  By Poisson
thinning this has the same law as independent per-pair counts, at a cost
proportional to the number of edges instead of the number of pairs.
"""
from __future__ import annotations

import math
from itertools import repeat
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .multigraph import GraphBatch, RootedMultiGraph

CANONICAL = "canonical"
POWER = "power"
MODULATED = "modulated"

DEFAULT_CAP = 10**6


def _check_lambda(lam: float) -> None:
    if not lam >= 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")


def class_pair_counts(n: int, b: int = 2) -> list[int]:
    """Number of unordered leaf pairs of T_n with lca height h, for h = 1..n."""
    return [b ** (n - h) * (b * (b - 1) // 2) * b ** (2 * h - 2) for h in range(1, n + 1)]


def ell_int(x: int, b: int = 2) -> int:
    """Number of base-b digits of an interned leaf (its lca height with the identity)."""
    if b == 2:
        return int(x).bit_length()
    k = 0
    while x:
        x //= b
        k += 1
    return k


def _uniform_below(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in [0, bound) for arbitrarily large bound."""
    if bound <= 2**62:
        return int(rng.integers(bound))
    nbits = bound.bit_length()
    while True:
        value = 0
        for _ in range(0, nbits, 32):
            value = (value << 32) | int(rng.integers(2**32))
        value >>= (-nbits) % 32
        if value < bound:
            return value


def _same_class_partner(x, k, b, rng, size=None):
    """Leaves y with lca_height(x, y) == k, uniform among the (b-1) b**(k-1) choices."""
    bk1 = np.asarray(b, dtype=np.int64) ** (np.asarray(k, dtype=np.int64) - 1)
    high = (x // (bk1 * b)) * (bk1 * b)
    digit = (x // bk1) % b
    new_digit = (digit + rng.integers(1, b, size=size)) % b
    low = rng.integers(0, bk1, size=size)
    return high + new_digit * bk1 + low


def sample_finite_edge_model_batch(n: int, lam: float, b: int, reps: int, rng: np.random.Generator) -> GraphBatch:
    """``reps`` independent copies of G_n(lambda); vertex ``offset + x`` is leaf x."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_lambda(lam)
    V = b**n
    offsets = np.arange(reps + 1, dtype=np.int64) * V
    batch = GraphBatch(offsets, offsets[:-1].copy())
    us, vs = [], []
    for h in range(1, n + 1):
        mean = lam * V * (b - 1) / (2.0 * b**h)
        counts = rng.poisson(mean, size=reps)
        total = int(counts.sum())
        if total == 0:
            continue
        owner_off = np.repeat(offsets[:-1], counts)
        x = rng.integers(0, V, size=total)
        y = _same_class_partner(x, h, b, rng, size=total)
        us.append(owner_off + x)
        vs.append(owner_off + y)
    if us:
        batch.add_edges(np.concatenate(us), np.concatenate(vs))
    return batch


def sample_finite_edge_model(n: int, lam: float, b: int = 2, rng: np.random.Generator | None = None) -> RootedMultiGraph:
    rng = np.random.default_rng() if rng is None else rng
    batch = sample_finite_edge_model_batch(n, lam, b, 1, rng)
    return RootedMultiGraph.from_edges(b**n, batch.u, batch.v, 0, labels=np.arange(b**n))


def sample_edge_model_per_pair(n: int, lam: float, b: int, rng: np.random.Generator) -> RootedMultiGraph:
    """Brute-force G_n(lambda): one Poisson draw per unordered pair.  O(b**(2n))."""
    V = b**n
    x, y = np.triu_indices(V, k=1)
    from .group_tree import lca_height_int

    k = lca_height_int(x, y, b)
    counts = rng.poisson(lam * np.power(float(b), 1 - 2 * k))
    return RootedMultiGraph.from_edges(V, np.repeat(x, counts), np.repeat(y, counts), 0, labels=np.arange(V))


# -- infinite volume ---------------------------------------------------------

@dataclass
class ClusterSample:
    graph: RootedMultiGraph
    escaped_level: int
    truncated: bool
    exploration_steps: int
    edge_u: np.ndarray = field(repr=False, default=None)
    edge_v: np.ndarray = field(repr=False, default=None)
    edge_marks: np.ndarray = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return self.graph.n_vertices

    def size_at(self, lam: float) -> int:
        """Root-cluster size after keeping only edges with mark < lam (coupled thinning)."""
        from .multigraph import component_labels

        keep = self.edge_marks < lam
        _, lab = component_labels(self.graph.n_vertices, self.edge_u[keep], self.edge_v[keep])
        return int(np.count_nonzero(lab == lab[0]))


_SMALL = 2**62


def _targets(xs: list[int], lam: float, b: int, rng: np.random.Generator):
    """Po(lam) edge draws from each leaf in ``xs``: (source position, target) lists."""
    m = rng.poisson(lam, size=len(xs))
    src = np.repeat(np.arange(len(xs), dtype=np.int64), m)
    if not len(src):
        return src, []
    ks = rng.geometric((b - 1) / b, size=len(src))
    shifts = rng.integers(1, b, size=len(src))
    x_small = max(xs) < _SMALL
    small = (ks <= 39 if b > 2 else ks <= 61) & x_small
    out = np.zeros(len(src), dtype=np.int64)
    if small.any():
        x = np.asarray(xs, dtype=np.int64)[src[small]]
        bk1 = np.power(np.int64(b), ks[small] - 1)
        high = (x // (bk1 * b)) * (bk1 * b)
        digit = (x // bk1) % b
        out[small] = high + ((digit + shifts[small]) % b) * bk1 + rng.integers(0, bk1)
    ys = out.tolist()
    for i in np.flatnonzero(~small).tolist():
        x, k = xs[src[i]], int(ks[i])
        bk1 = b ** (k - 1)
        high = (x // (bk1 * b)) * (bk1 * b)
        ys[i] = high + ((x // bk1 % b + int(shifts[i])) % b) * bk1 + _uniform_below(rng, bk1)
    return src, ys


def explore_infinite_cluster(lam: float, b: int = 2, rng: np.random.Generator | None = None,
                             cap: int = DEFAULT_CAP) -> ClusterSample:
    """Exact sample of the identity's cluster in G_inf(lambda) by lazy BFS.

    Each leaf sends Po(lambda) edge draws in total, since its rates to all
    other leaves sum to 1.  A draw picks lca height k with probability
    (b-1) b**-k and then a uniform leaf at that height.  Leaves are processed
    in index order, one BFS generation at a time.  A draw that lands on a leaf
    processed earlier is discarded: that pair's count was already fixed from
    the other side, and discarding is a Poisson thinning, so every pair keeps
    an independent Po(lambda b**(1-2k)) count.

    Every recorded edge carries a mark uniform on [0, lambda); keeping marks
    below lam' < lambda gives a coupled sample at lam'.
    """
    _check_lambda(lam)
    if cap < 1:
        raise ValueError("cap must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    index = {0: 0}
    labels = [0]
    eu: list[np.ndarray] = []
    ev: list[np.ndarray] = []
    lo, hi = 0, 1  # current generation is labels[lo:hi]
    truncated = False
    while lo < hi:
        src, ys = _targets(labels[lo:hi], lam, b, rng)
        js = np.fromiter(map(index.get, ys, repeat(-1)), dtype=np.int64, count=len(ys))
        fresh = np.flatnonzero(js < 0)
        if len(fresh):
            # first-occurrence order keeps the indexing identical to a sequential scan
            fresh_ys = [ys[i] for i in fresh.tolist()]
            uniq, first, inv = np.unique(np.asarray(fresh_ys, dtype=object if max(fresh_ys) >= _SMALL else np.int64),
                                         return_index=True, return_inverse=True)
            order = np.argsort(first, kind="stable")
            rank = np.empty(len(order), dtype=np.int64)
            rank[order] = np.arange(len(order))
            new_ids = len(labels) + rank
            ordered = [fresh_ys[i] for i in np.sort(first).tolist()]
            index.update(zip(ordered, range(len(labels), len(labels) + len(ordered))))
            labels.extend(ordered)
            js[fresh] = new_ids[inv.ravel()]
        ii = src + lo
        keep = js > ii
        eu.append(ii[keep])
        ev.append(js[keep])
        lo, hi = hi, len(labels)
        if len(labels) > cap and lo < hi:
            truncated = True
            break
    steps = lo
    eu_a = np.concatenate(eu) if eu else np.empty(0, dtype=np.int64)
    ev_a = np.concatenate(ev) if ev else np.empty(0, dtype=np.int64)
    marks = rng.uniform(0.0, lam, size=len(eu_a)) if lam > 0 else np.empty(0)
    lab = np.empty(len(labels), dtype=object)
    lab[:] = labels
    graph = RootedMultiGraph.from_edges(len(labels), eu_a, ev_a, 0, labels=lab)
    return ClusterSample(graph, ell_int(max(labels), b), truncated, steps, eu_a, ev_a, marks)


def sample_root_edges(lam: float, b: int, rng: np.random.Generator) -> np.ndarray:
    """Interned neighbours of the identity in G_inf(lambda), one entry per edge."""
    m = int(rng.poisson(lam))
    ks = rng.geometric((b - 1) / b, size=m)
    out = np.empty(m, dtype=object)
    for i, k in enumerate(ks.tolist()):
        bk1 = b ** (k - 1)
        out[i] = int(rng.integers(1, b)) * bk1 + _uniform_below(rng, bk1)
    return out


def sample_root_degrees(lam: float, b: int, N: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Multi-degree and simple degree of the identity in N independent copies of G_inf(lambda).

    The identity's edges are exactly the first Po(lambda) draws of
    :func:`explore_infinite_cluster`, so only those are generated.
    """
    _check_lambda(lam)
    multi = rng.poisson(lam, size=N)
    owner = np.repeat(np.arange(N, dtype=np.int64), multi)
    ks = rng.geometric((b - 1) / b, size=len(owner))
    shifts = rng.integers(1, b, size=len(owner))
    small = ks <= (61 if b == 2 else 39)
    bk1 = np.power(np.int64(b), np.where(small, ks, 1) - 1)
    target = shifts * bk1 + rng.integers(0, bk1)
    simple = np.zeros(N, dtype=np.int64)
    o, t = owner[small], target[small]
    if len(o):
        order = np.lexsort((t, o))
        o, t = o[order], t[order]
        first = np.ones(len(o), dtype=bool)
        first[1:] = (o[1:] != o[:-1]) | (t[1:] != t[:-1])
        np.add.at(simple, o[first], 1)
    big: dict[int, set] = {}
    for i in np.flatnonzero(~small).tolist():
        k = int(ks[i])
        bk = b ** (k - 1)
        big.setdefault(int(owner[i]), set()).add(int(shifts[i]) * bk + _uniform_below(rng, bk))
    for r, targets in big.items():
        simple[r] += len(targets)
    return multi, simple


# -- group percolation on V_k ------------------------------------------------

@dataclass(frozen=True)
class GeneratingMeasure:
    """Edge-rate profile mu(y) depending only on ell(y).

    Pairs (g, h) receive Po(lambda * b * mu(g^-1 h)) edges, so CANONICAL
    (mu = b**(-2 ell)) reproduces the edge model's rate b**(1-2 ell).
    """
    kind: str = CANONICAL
    b: int = 2
    alpha: float | None = None
    f: Callable[[int], float] | None = None

    def __post_init__(self):
        if self.kind == POWER:
            if self.alpha is None or not self.alpha > self.b:
                raise ValueError(f"power measure needs alpha > b (finite measure), got {self.alpha}")
        elif self.kind == MODULATED:
            if self.f is None:
                raise ValueError("modulated measure needs f")
            vals = [self.f(l) for l in range(1, 65)]
            if any(q < p for p, q in zip(vals, vals[1:])):
                raise ValueError("modulating function must be increasing")
        elif self.kind != CANONICAL:
            raise ValueError(f"unknown measure kind {self.kind!r}")

    @classmethod
    def canonical(cls, b: int = 2) -> "GeneratingMeasure":
        return cls(CANONICAL, b)

    @classmethod
    def power(cls, alpha: float, b: int = 2) -> "GeneratingMeasure":
        return cls(POWER, b, alpha=alpha)

    @classmethod
    def modulated(cls, f: Callable[[int], float], b: int = 2) -> "GeneratingMeasure":
        return cls(MODULATED, b, f=f)

    def mu(self, ell: int) -> float:
        if ell < 1:
            return 0.0
        if self.kind == CANONICAL:
            return float(self.b) ** (-2 * ell)
        if self.kind == POWER:
            return self.alpha ** (-ell)
        return float(self.b) ** (-2 * ell) * self.f(ell)

    def pair_rate(self, ell: int) -> float:
        return self.b * self.mu(ell)

    def tag(self) -> str:
        if self.kind == POWER:
            return f"power(alpha={self.alpha:g})"
        return self.kind


def _digit_add(x: np.ndarray, g: np.ndarray, b: int, k: int) -> np.ndarray:
    if b == 2:
        return x ^ g
    out = np.zeros_like(x)
    scale = 1
    xs, gs = x.copy(), g.copy()
    for _ in range(k):
        out += ((xs % b + gs % b) % b) * scale
        xs //= b
        gs //= b
        scale *= b
    return out


def sample_group_volume(measure: GeneratingMeasure, lam: float, k: int,
                        rng: np.random.Generator | None = None, reps: int = 1):
    """G_mu(lambda) restricted to V_k = {x : ell(x) <= k}.

    Edges are placed as x -> x + g with g uniform on {ell(g) = class}; this is
    group addition rather than tree geometry, so it is an independent route to
    the finite edge model when the measure is canonical.  Returns a
    RootedMultiGraph for ``reps == 1`` and a GraphBatch otherwise.
    """
    _check_lambda(lam)
    if k < 0:
        raise ValueError("k must be >= 0")
    rng = np.random.default_rng() if rng is None else rng
    b = measure.b
    V = b**k
    offsets = np.arange(reps + 1, dtype=np.int64) * V
    batch = GraphBatch(offsets, offsets[:-1].copy())
    us, vs = [], []
    for ell in range(1, k + 1):
        pairs = V * (b - 1) * b ** (ell - 1) / 2.0
        counts = rng.poisson(lam * pairs * measure.pair_rate(ell), size=reps)
        total = int(counts.sum())
        if not total:
            continue
        x = rng.integers(0, V, size=total)
        g = rng.integers(1, b, size=total) * b ** (ell - 1) + rng.integers(0, b ** (ell - 1), size=total)
        y = _digit_add(x, g, b, k)
        off = np.repeat(offsets[:-1], counts)
        us.append(off + x)
        vs.append(off + y)
    if us:
        batch.add_edges(np.concatenate(us), np.concatenate(vs))
    if reps == 1:
        return RootedMultiGraph.from_edges(V, batch.u, batch.v, 0, labels=np.arange(V))
    return batch


def largest_cluster_fractions(batch: GraphBatch) -> np.ndarray:
    lab = batch.labels()
    owner = batch.owner()
    sizes = np.bincount(lab)
    comp_owner = np.zeros(len(sizes), dtype=np.int64)
    comp_owner[lab] = owner
    best = np.zeros(batch.n_graphs, dtype=np.int64)
    np.maximum.at(best, comp_owner, sizes)
    return best / batch.sizes


def geogeo_bound(lam: float, n: int, b: int = 2) -> float:
    """Upper bound on P(cluster of the identity is not inside L_n)."""
    return (1.0 - math.exp(-lam) / b) ** n
