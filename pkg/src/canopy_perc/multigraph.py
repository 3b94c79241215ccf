"""Rooted multigraphs, single and batched.

A :class:`RootedMultiGraph` stores each distinct pair once with its
multiplicity.  A :class:`GraphBatch` is the disjoint union of many graphs with
one root each; it keeps individual edges (repeats allowed) so that vectorised
samplers can append to it cheaply.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


def _consolidate(u, v):
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    keep = u != v
    u, v = u[keep], v[keep]
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    if len(lo) == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy()
    span = int(hi.max()) + 1
    keys, mult = np.unique(lo * span + hi, return_counts=True)
    return keys // span, keys % span, mult.astype(np.int64)


def component_labels(n_vertices: int, u, v) -> tuple[int, np.ndarray]:
    if n_vertices == 0:
        return 0, np.empty(0, dtype=np.int64)
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    adj = coo_matrix((np.ones(len(u), dtype=np.int8), (u, v)), shape=(n_vertices, n_vertices))
    count, labels = connected_components(adj, directed=False)
    return count, labels.astype(np.int64)


@dataclass
class RootedMultiGraph:
    n_vertices: int
    u: np.ndarray
    v: np.ndarray
    mult: np.ndarray
    root: int = 0
    labels: np.ndarray | None = None  # interned leaf address per vertex

    def __post_init__(self):
        if not 0 <= self.root < max(self.n_vertices, 1):
            raise ValueError(f"root {self.root} outside vertex range {self.n_vertices}")
        if len(self.mult) and self.mult.min() < 1:
            raise ValueError("multiplicities must be >= 1")
        if np.any(self.u >= self.v):
            raise ValueError("edges must be stored with u < v and no loops")

    @classmethod
    def from_edges(cls, n_vertices: int, u, v, root: int = 0, labels=None) -> "RootedMultiGraph":
        """Build from individual (possibly repeated) edges; loops are dropped."""
        cu, cv, m = _consolidate(u, v)
        return cls(n_vertices, cu, cv, m, root, None if labels is None else np.asarray(labels))

    @classmethod
    def single_vertex(cls, label=None) -> "RootedMultiGraph":
        empty = np.empty(0, dtype=np.int64)
        labels = None if label is None else np.asarray([label], dtype=object)
        return cls(1, empty, empty.copy(), empty.copy(), 0, labels)

    @property
    def edge_total(self) -> int:
        """Number of edges counted with multiplicity."""
        return int(self.mult.sum())

    @property
    def n_pairs(self) -> int:
        return len(self.mult)

    def expanded_edges(self) -> tuple[np.ndarray, np.ndarray]:
        return np.repeat(self.u, self.mult), np.repeat(self.v, self.mult)

    def multi_degree(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=np.int64)
        np.add.at(deg, self.u, self.mult)
        np.add.at(deg, self.v, self.mult)
        return deg

    def simple_degree(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=np.int64)
        np.add.at(deg, self.u, 1)
        np.add.at(deg, self.v, 1)
        return deg

    def components(self) -> tuple[int, np.ndarray]:
        return component_labels(self.n_vertices, self.u, self.v)

    def is_connected(self) -> bool:
        return self.components()[0] == 1

    def n_isolated(self) -> int:
        return int(np.count_nonzero(self.simple_degree() == 0))

    def root_component(self) -> "RootedMultiGraph":
        _, lab = self.components()
        return self.induced(np.flatnonzero(lab == lab[self.root]))

    def induced(self, vertices) -> "RootedMultiGraph":
        """Subgraph on ``vertices`` (sorted ids); the root must be among them."""
        vertices = np.asarray(vertices, dtype=np.int64)
        remap = np.full(self.n_vertices, -1, dtype=np.int64)
        remap[vertices] = np.arange(len(vertices))
        keep = (remap[self.u] >= 0) & (remap[self.v] >= 0)
        nu, nv = remap[self.u[keep]], remap[self.v[keep]]
        lo, hi = np.minimum(nu, nv), np.maximum(nu, nv)
        order = np.lexsort((hi, lo))
        labels = None if self.labels is None else self.labels[vertices]
        root = int(remap[self.root])
        if root < 0:
            raise ValueError("root not in the induced vertex set")
        return RootedMultiGraph(len(vertices), lo[order], hi[order], self.mult[keep][order], root, labels)

    def parallel_pairs(self) -> int:
        return int(np.count_nonzero(self.mult >= 2))

    def dump(self, b: int, n=None, fmt_label=None) -> str:
        """Text dump: header "b n root", then one "u v multiplicity" line per pair."""
        from .group_tree import int_to_text

        def name(i):
            if self.labels is None:
                return str(int(i))
            lab = self.labels[i]
            return fmt_label(lab) if fmt_label else int_to_text(int(lab), b)

        lines = [f"{b} {'inf' if n is None else n} {name(self.root)}"]
        for a, c, m in zip(self.u, self.v, self.mult):
            lines.append(f"{name(a)} {name(c)} {int(m)}")
        return "\n".join(lines) + "\n"


class UnionFind:
    """Array-backed disjoint sets with path halving and union by size."""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.size = [1] * size
        self.n_sets = size

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.n_sets -= 1
        return True

    def add(self) -> int:
        self.parent.append(len(self.parent))
        self.size.append(1)
        self.n_sets += 1
        return len(self.parent) - 1


def union_find_connected(n_vertices: int, u, v) -> bool:
    """Independent connectivity check used to audit the scipy-based path."""
    uf = UnionFind(n_vertices)
    for a, c in zip(np.asarray(u).tolist(), np.asarray(v).tolist()):
        uf.union(a, c)
    return uf.n_sets <= 1


@dataclass
class GraphBatch:
    """Disjoint union of ``n_graphs`` rooted multigraphs.

    Graph i owns global vertex ids ``offsets[i] .. offsets[i+1]-1``; ``u, v``
    hold individual edges in global ids.
    """
    offsets: np.ndarray
    roots: np.ndarray
    u: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    v: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def n_graphs(self) -> int:
        return len(self.offsets) - 1

    @property
    def n_vertices(self) -> int:
        return int(self.offsets[-1])

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def owner(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_graphs), self.sizes)

    def add_edges(self, u, v) -> None:
        self.u = np.concatenate([self.u, np.asarray(u, dtype=np.int64)])
        self.v = np.concatenate([self.v, np.asarray(v, dtype=np.int64)])

    def labels(self) -> np.ndarray:
        return component_labels(self.n_vertices, self.u, self.v)[1]

    def root_components(self) -> "GraphBatch":
        """Batch of the root components, vertices kept in original order."""
        lab = self.labels()
        owner = self.owner()
        root_lab = lab[self.roots]
        keep = lab == root_lab[owner]
        new_id = np.cumsum(keep) - 1
        sizes = np.bincount(owner[keep], minlength=self.n_graphs)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        ekeep = keep[self.u] & (self.u != self.v)
        return GraphBatch(offsets, new_id[self.roots], new_id[self.u[ekeep]], new_id[self.v[ekeep]])

    def root_component_stats(self) -> tuple[np.ndarray, np.ndarray]:
        """(vertex count, edge count with multiplicity) of each root component."""
        lab = self.labels()
        owner = self.owner()
        root_lab = lab[self.roots]
        in_root = lab == root_lab[owner]
        sizes = np.bincount(owner[in_root], minlength=self.n_graphs)
        loops = self.u == self.v
        e_in = in_root[self.u] & ~loops
        edges = np.bincount(owner[self.u[e_in]], minlength=self.n_graphs)
        return sizes, edges

    def connectivity(self) -> tuple[np.ndarray, np.ndarray]:
        """Per graph: connected flag and number of isolated vertices."""
        lab = self.labels()
        owner = self.owner()
        n_comp = np.zeros(self.n_graphs, dtype=np.int64)
        first = np.unique(lab, return_index=True)[1]
        np.add.at(n_comp, owner[first], 1)
        nonloop = self.u != self.v
        deg = np.bincount(np.concatenate([self.u[nonloop], self.v[nonloop]]), minlength=self.n_vertices)
        isolated = np.bincount(owner[deg == 0], minlength=self.n_graphs)
        return n_comp == 1, isolated

    def graph(self, i: int) -> RootedMultiGraph:
        lo, hi = int(self.offsets[i]), int(self.offsets[i + 1])
        sel = (self.u >= lo) & (self.u < hi)
        return RootedMultiGraph.from_edges(hi - lo, self.u[sel] - lo, self.v[sel] - lo, int(self.roots[i]) - lo)

    @classmethod
    def from_graphs(cls, graphs) -> "GraphBatch":
        sizes = [g.n_vertices for g in graphs]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        us, vs = [], []
        for g, off in zip(graphs, offsets[:-1]):
            eu, ev = g.expanded_edges()
            us.append(eu + off)
            vs.append(ev + off)
        roots = np.asarray([g.root for g in graphs], dtype=np.int64) + offsets[:-1]
        cat = lambda xs: np.concatenate(xs) if xs else np.empty(0, dtype=np.int64)
        return cls(offsets, roots, cat(us).astype(np.int64), cat(vs).astype(np.int64))
