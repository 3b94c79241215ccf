"""Splitting dynamics: the synchronous star operation and the asynchronous mafia process.

Star: every vertex v becomes b offspring; each offspring pair gets Po(lambda/b)
new edges; each endpoint of an old edge moves to a uniform offspring of its old
vertex; the root moves to a uniform offspring; the root component is kept.

Mafia: the same split, but each vertex splits at its own Exp(1) time.
Keeping all vertices from a single start vertex, the result at time t is the
edge model (pair rate lambda * b**(1-d)) on the leaves of a Yule tree T(t),
which :func:`sample_async_graph` samples directly.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .group_tree import RootedTree, tree_from_parents
from .multigraph import GraphBatch, RootedMultiGraph

KEEP_ALL = "keep_all"
ROOT_COMPONENT = "root_component"


def _check_lambda(lam: float) -> None:
    if not lam >= 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")


# -- star ----------------------------------------------------------------------

def _star_edges(n_vertices: int, u: np.ndarray, v: np.ndarray, lam: float, b: int, rng: np.random.Generator):
    """Edges after splitting every vertex; vertex x becomes x*b .. x*b + b-1."""
    nu = u * b + rng.integers(0, b, size=len(u))
    nv = v * b + rng.integers(0, b, size=len(v))
    pairs = np.array(list(combinations(range(b), 2)), dtype=np.int64)
    counts = rng.poisson(lam / b, size=n_vertices * len(pairs))
    owner = np.repeat(np.repeat(np.arange(n_vertices, dtype=np.int64), len(pairs)), counts)
    which = np.repeat(np.tile(np.arange(len(pairs)), n_vertices), counts)
    return (np.concatenate([nu, owner * b + pairs[which, 0]]),
            np.concatenate([nv, owner * b + pairs[which, 1]]))


def apply_star_batch(batch: GraphBatch, lam: float, b: int = 2, rng: np.random.Generator | None = None) -> GraphBatch:
    """Star applied to every graph of a batch of connected rooted graphs."""
    _check_lambda(lam)
    rng = np.random.default_rng() if rng is None else rng
    u, v = _star_edges(batch.n_vertices, batch.u, batch.v, lam, b, rng)
    roots = batch.roots * b + rng.integers(0, b, size=batch.n_graphs)
    return GraphBatch(batch.offsets * b, roots, u, v).root_components()


def apply_star(G: RootedMultiGraph, lam: float, b: int = 2, rng: np.random.Generator | None = None) -> RootedMultiGraph:
    _check_lambda(lam)
    if not G.is_connected():
        raise ValueError("star needs a connected rooted graph; pass the root component")
    rng = np.random.default_rng() if rng is None else rng
    eu, ev = G.expanded_edges()
    u, v = _star_edges(G.n_vertices, eu, ev, lam, b, rng)
    root = G.root * b + int(rng.integers(b))
    labels = None
    if G.labels is not None:
        # the new leaf layer becomes coordinate 1 of every address
        labels = np.empty(G.n_vertices * b, dtype=object)
        labels[:] = [int(x) * b + c for x in G.labels for c in range(b)]
    out = RootedMultiGraph.from_edges(G.n_vertices * b, u, v, root, labels)
    return out.root_component()


# -- event-driven mafia process -------------------------------------------------

def run_mafia(initial: RootedMultiGraph, lam: float, t: float, b: int = 2,
              rng: np.random.Generator | None = None, mode: str = ROOT_COMPONENT,
              boost: bool = False, trace: list | None = None,
              deterministic_clock: bool = False) -> RootedMultiGraph:
    """Run the mafia process from ``initial`` up to time ``t``.

    ``boost`` gives the offspring pairs of the initial root rate lambda instead
    of lambda/b.  If ``trace`` is a list, (time, vertex, event) tuples are
    appended to it.  ``deterministic_clock`` replaces every Exp(1) lifetime by
    1, which turns the run up to t=1 into one synchronous star step.
    """
    _check_lambda(lam)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if mode not in (KEEP_ALL, ROOT_COMPONENT):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng() if rng is None else rng
    life = (lambda: 1.0) if deterministic_clock else (lambda: float(rng.exponential()))

    adj: dict[int, dict[int, int]] = {i: {} for i in range(initial.n_vertices)}
    for a, c, m in zip(initial.u.tolist(), initial.v.tolist(), initial.mult.tolist()):
        adj[a][c] = m
        adj[c][a] = m
    heap = [(life(), i) for i in range(initial.n_vertices)]
    heapq.heapify(heap)
    root = initial.root
    boosted = initial.root if boost else None
    next_id = initial.n_vertices
    pairs = list(combinations(range(b), 2))
    share = [1.0 / b] * b

    while heap and heap[0][0] <= t:
        now, x = heapq.heappop(heap)
        if x not in adj:
            continue
        kids = list(range(next_id, next_id + b))
        next_id += b
        for c in kids:
            adj[c] = {}
            heapq.heappush(heap, (now + life(), c))
        for w, m in adj.pop(x).items():
            del adj[w][x]
            for c, mc in zip(kids, rng.multinomial(m, share).tolist()):
                if mc:
                    adj[c][w] = adj[c].get(w, 0) + mc
                    adj[w][c] = adj[w].get(c, 0) + mc
        rate = lam if x == boosted else lam / b
        for i, j in pairs:
            m = int(rng.poisson(rate))
            if m:
                adj[kids[i]][kids[j]] = m
                adj[kids[j]][kids[i]] = m
        if x == root:
            root = kids[int(rng.integers(b))]
        if trace is not None:
            trace.append((now, x, "split"))
        if mode == ROOT_COMPONENT:
            seen = {root}
            stack = [root]
            while stack:
                a = stack.pop()
                for w in adj[a]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            if len(seen) < len(adj):
                for a in [a for a in adj if a not in seen]:
                    del adj[a]
                    if trace is not None:
                        trace.append((now, a, "discard"))

    ids = sorted(adj)
    index = {a: i for i, a in enumerate(ids)}
    us, vs, ms = [], [], []
    for a in ids:
        for w, m in adj[a].items():
            if a < w:
                us.append(index[a]); vs.append(index[w]); ms.append(m)
    us_a = np.repeat(np.asarray(us, dtype=np.int64), ms)
    vs_a = np.repeat(np.asarray(vs, dtype=np.int64), ms)
    return RootedMultiGraph.from_edges(len(ids), us_a, vs_a, index[root], labels=np.asarray(ids, dtype=np.int64))


# -- Yule trees ----------------------------------------------------------------

@dataclass
class YuleTree:
    """b-ary Yule tree grown to time t; node 0 is the root.

    ``split_time[v]`` is inf for leaves.  ``children[v]`` lists the b children
    of an internal node (``-1`` entries for leaves).
    """
    t: float
    b: int
    parent: np.ndarray
    birth: np.ndarray
    split_time: np.ndarray
    children: np.ndarray
    depth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.children[:, 0] < 0

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.is_leaf)

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.is_leaf))

    @property
    def n_internal(self) -> int:
        return self.n_nodes - self.n_leaves

    def to_rooted_tree(self) -> RootedTree:
        return tree_from_parents(self.parent, self.b)


def sample_yule_tree(t: float, b: int = 2, rng: np.random.Generator | None = None) -> YuleTree:
    if t < 0:
        raise ValueError("t must be nonnegative")
    rng = np.random.default_rng() if rng is None else rng
    parent = [np.array([-1], dtype=np.int64)]
    birth = [np.zeros(1)]
    ring = [rng.exponential(size=1)]
    depth = [np.zeros(1, dtype=np.int64)]
    kid_rows = []
    gen_ids = np.array([0], dtype=np.int64)
    next_id = 1
    while True:
        rings = ring[-1] < t
        if not rings.any():
            break
        splitting = gen_ids[rings]
        m = len(splitting) * b
        ids = next_id + np.arange(m, dtype=np.int64)
        next_id += m
        kid_rows.append((splitting, ids.reshape(-1, b)))
        born = np.repeat(ring[-1][rings], b)
        parent.append(np.repeat(splitting, b))
        birth.append(born)
        depth.append(np.repeat(depth[-1][rings], b) + 1)
        ring.append(born + rng.exponential(size=m))
        gen_ids = ids
    parent_a = np.concatenate(parent)
    ring_a = np.concatenate(ring)
    children = np.full((next_id, b), -1, dtype=np.int64)
    for sp, rows in kid_rows:
        children[sp] = rows
    split_time = np.where(children[:, 0] >= 0, ring_a, np.inf)
    return YuleTree(t, b, parent_a, np.concatenate(birth), split_time, children, np.concatenate(depth))


def _descend(tree_children: np.ndarray, start: np.ndarray, b: int, rng: np.random.Generator) -> np.ndarray:
    cur = start.copy()
    todo = np.flatnonzero(tree_children[cur, 0] >= 0)
    while len(todo):
        cur[todo] = tree_children[cur[todo], rng.integers(0, b, size=len(todo))]
        todo = todo[tree_children[cur[todo], 0] >= 0]
    return cur


def sample_async_edges(tree: YuleTree, lam: float, rng: np.random.Generator, boost: bool = False):
    """Edges of the keep-all mafia graph on ``tree``'s leaves, as leaf indices.

    Every pair of leaves whose lca is p, entering p through children i != j,
    gets Po(lambda * b**(1-d)) edges.  Summed over such pairs this is
    Po(lambda/b) per (p, {i, j}), and each endpoint descends uniformly.
    """
    _check_lambda(lam)
    b = tree.b
    internal = np.flatnonzero(~tree.is_leaf)
    pairs = np.array(list(combinations(range(b), 2)), dtype=np.int64)
    rate = np.full((len(internal), len(pairs)), lam / b)
    if boost and len(internal) and internal[0] == 0:
        rate[0, :] = lam
    counts = rng.poisson(rate).ravel()
    p = np.repeat(np.repeat(internal, len(pairs)), counts)
    which = np.repeat(np.tile(np.arange(len(pairs)), len(internal)), counts)
    ends_a = _descend(tree.children, tree.children[p, pairs[which, 0]], b, rng)
    ends_b = _descend(tree.children, tree.children[p, pairs[which, 1]], b, rng)
    leaf_index = np.full(tree.n_nodes, -1, dtype=np.int64)
    leaf_index[tree.leaves] = np.arange(tree.n_leaves)
    return leaf_index[ends_a], leaf_index[ends_b]


def sample_async_graph(t: float, lam: float, b: int = 2, rng: np.random.Generator | None = None,
                       boost: bool = False, tree: YuleTree | None = None) -> tuple[RootedMultiGraph, YuleTree]:
    """Keep-all mafia graph at time t from one vertex; vertex i is leaf ``tree.leaves[i]``."""
    rng = np.random.default_rng() if rng is None else rng
    tree = sample_yule_tree(t, b, rng) if tree is None else tree
    u, v = sample_async_edges(tree, lam, rng, boost)
    # the root moves to a uniform offspring at every split, i.e. a uniform descent
    root_node = _descend(tree.children, np.array([0]), b, rng)[0]
    root = int(np.searchsorted(tree.leaves, root_node))
    return RootedMultiGraph.from_edges(tree.n_leaves, u, v, root), tree


# -- the limit object M(lambda) -------------------------------------------------

def mafia_limit_path_length(lam: float, epsilon: float) -> int:
    """Smallest n with (1 - exp(-lambda)/2)**n < epsilon."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    _check_lambda(lam)
    q = 1.0 - math.exp(-lam) / 2.0
    n = max(int(math.ceil(math.log(epsilon) / math.log(q))), 0)
    while q**n >= epsilon:
        n += 1
    while n > 0 and q ** (n - 1) < epsilon:
        n -= 1
    return n


class _LazyTree:
    """The random tree T behind M(lambda), built on demand.

    Path vertex v_m has children v_(m-1) and w_m, where w_m roots a Yule tree
    T(S_m) with S_m = s_1 + ... + s_m.  Yule nodes record birth time and the
    horizon of their tree; they split iff their Exp(1) ring falls before it.
    """

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.kids: list = []
        self.parent: list[int] = []
        self.region: list[int] = []  # m for nodes of T_m, -1 for path vertices
        self.ring: list[float] = []
        self.horizon: list[float] = []
        self.path: list[int] = []
        self.path_index: dict[int, int] = {}
        self.S = [0.0]
        self.path_node(0)

    def _new(self, parent: int, region: int, birth: float, horizon: float) -> int:
        self.kids.append(None)
        self.parent.append(parent)
        self.region.append(region)
        self.ring.append(birth + float(self.rng.exponential()))
        self.horizon.append(horizon)
        return len(self.kids) - 1

    def path_node(self, m: int) -> int:
        while len(self.path) <= m:
            k = len(self.path)
            if k > 0:
                self.S.append(self.S[-1] + float(self.rng.exponential()))
            v = self._new(-1, -1, 0.0, 0.0)
            if k > 0:
                self.parent[self.path[k - 1]] = v
            else:
                self.kids[v] = ()
            self.path.append(v)
            self.path_index[v] = k
        return self.path[m]

    def get_parent(self, v: int) -> int:
        if self.parent[v] < 0:
            return self.path_node(self.path_index[v] + 1)
        return self.parent[v]

    def children(self, v: int) -> tuple:
        if self.kids[v] is None:
            if self.region[v] < 0:
                m = self.path_index[v]
                w = self._new(v, m, 0.0, self.S[m])
                self.kids[v] = (self.path_node(m - 1), w)
            elif self.ring[v] < self.horizon[v]:
                r, reg, hor = self.ring[v], self.region[v], self.horizon[v]
                self.kids[v] = (self._new(v, reg, r, hor), self._new(v, reg, r, hor))
            else:
                self.kids[v] = ()
        return self.kids[v]

    def random_target(self, x: int) -> int:
        """Leaf y != x with probability 2**(1 - d(x, y)), the normalised edge rate from x."""
        j = int(self.rng.geometric(0.5))
        prev, a = x, x
        for _ in range(j):
            prev, a = a, self.get_parent(a)
        kids = self.children(a)
        cur = kids[1] if kids[0] == prev else kids[0]
        while True:
            kids = self.children(cur)
            if not kids:
                return cur
            cur = kids[int(self.rng.integers(2))]


@dataclass
class MafiaLimitSample:
    graph: RootedMultiGraph
    boundary_touched: bool
    path_length: int
    truncated: bool = False
    regions: np.ndarray = field(default=None, repr=False)


def sample_mafia_limit(lam: float, rng: np.random.Generator | None = None, epsilon: float = 1e-6,
                       cap: int = 10**6) -> MafiaLimitSample:
    """Component of v_0 in the random graph defining M(lambda) (binary splitting).

    Exploration is lazy and exact, with the same thinning rule as
    :func:`canopy_perc.edge_model.explore_infinite_cluster`.  It stops and
    flags the sample as soon as a vertex of some T_m with m >= n is reached,
    n being :func:`mafia_limit_path_length`.
    """
    _check_lambda(lam)
    n = mafia_limit_path_length(lam, epsilon)
    rng = np.random.default_rng() if rng is None else rng
    tree = _LazyTree(rng)
    v0 = tree.path[0]
    index = {v0: 0}
    nodes = [v0]
    processed = [False]
    eu: list[int] = []
    ev: list[int] = []
    touched = truncated = False
    head = 0
    while head < len(nodes) and not touched:
        i = head
        head += 1
        x = nodes[i]
        for _ in range(int(rng.poisson(lam))):
            y = tree.random_target(x)
            if tree.region[y] >= n:
                touched = True
                break
            j = index.get(y)
            if j is None:
                j = len(nodes)
                index[y] = j
                nodes.append(y)
                processed.append(False)
            elif processed[j]:
                continue
            eu.append(i)
            ev.append(j)
        processed[i] = True
        if len(nodes) > cap:
            truncated = True
            break
    graph = RootedMultiGraph.from_edges(len(nodes), eu, ev, 0)
    regions = np.asarray([tree.region[v] for v in nodes], dtype=np.int64)
    return MafiaLimitSample(graph, touched, n, truncated, regions)


# -- double edges ------------------------------------------------------------------

def double_edge_stat(samples) -> tuple[float, float, int]:
    """P(root's two edges go to one neighbour | root multi-degree 2), its SE, and the count.

    ``samples`` may hold RootedMultiGraph objects or anything with a ``graph``
    attribute.
    """
    hits = total = 0
    for s in samples:
        g = getattr(s, "graph", s)
        at_root = (g.u == g.root) | (g.v == g.root)
        mult = g.mult[at_root]
        if mult.sum() != 2:
            continue
        total += 1
        hits += int(len(mult) == 1)
    if total == 0:
        raise ValueError("no sample has root multi-degree 2; estimate undefined")
    p = hits / total
    return p, math.sqrt(p * (1 - p) / total), total
