"""Leaf addresses of the canopy tree and the group they form.

A leaf of the b-ary canopy tree is identified with an element of the direct sum
of countably many copies of Z_b: digit ``i`` (1-based) is the label of the edge
between heights ``i - 1`` and ``i`` on the leaf's upward path.  Two leaves whose
addresses last differ at coordinate ``k`` meet at height ``k`` and are at tree
distance ``2k``.

Inside samplers, leaves are interned as integers ``sum(d_i * b**(i-1))``; the
canonical digit tuple is the external representation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

INFINITE = None  # height of T_infinity in TreeParams


class InvalidDigitError(ValueError):
    pass


class EqualLeavesError(ValueError):
    pass


@dataclass(frozen=True)
class LeafAddress:
    digits: tuple[int, ...]
    b: int = 2

    @property
    def ell(self) -> int:
        """Index of the last nonzero coordinate (0 for the identity)."""
        return len(self.digits)

    def to_int(self) -> int:
        value = 0
        for d in reversed(self.digits):
            value = value * self.b + d
        return value

    def __str__(self) -> str:
        return format_address(self)


@dataclass(frozen=True)
class TreeParams:
    b: int
    n: int | None = INFINITE

    def __post_init__(self):
        if self.b < 2:
            raise ValueError(f"branching factor must be >= 2, got {self.b}")
        if self.n is not None and self.n < 0:
            raise ValueError(f"height must be >= 0, got {self.n}")

    @property
    def n_leaves(self) -> int | None:
        return None if self.n is None else self.b**self.n


def make_leaf(digits: Iterable[int], b: int = 2) -> LeafAddress:
    digits = [int(d) for d in digits]
    for d in digits:
        if d < 0 or d >= b:
            raise InvalidDigitError(f"digit {d} not in range(0, {b})")
    while digits and digits[-1] == 0:
        digits.pop()
    return LeafAddress(tuple(digits), b)


def identity(b: int = 2) -> LeafAddress:
    return LeafAddress((), b)


def leaf_from_int(value: int, b: int = 2) -> LeafAddress:
    if value < 0:
        raise ValueError("leaf index must be nonnegative")
    digits = []
    while value:
        value, d = divmod(value, b)
        digits.append(d)
    return LeafAddress(tuple(digits), b)


def _check_base(x: LeafAddress, y: LeafAddress, b: int) -> None:
    if x.b != b or y.b != b:
        raise ValueError(f"addresses over base {x.b}/{y.b}, expected {b}")


def group_add(x: LeafAddress, y: LeafAddress, b: int | None = None) -> LeafAddress:
    b = x.b if b is None else b
    _check_base(x, y, b)
    m = max(len(x.digits), len(y.digits))
    xs = x.digits + (0,) * (m - len(x.digits))
    ys = y.digits + (0,) * (m - len(y.digits))
    return make_leaf(((p + q) % b for p, q in zip(xs, ys)), b)


def inverse(x: LeafAddress) -> LeafAddress:
    return make_leaf(((-d) % x.b for d in x.digits), x.b)


def lca_height(x: LeafAddress, y: LeafAddress) -> int:
    """Height of the lowest common ancestor; the tree distance is twice this."""
    if x == y:
        raise EqualLeavesError("lca_height is undefined for equal leaves")
    return group_add(x, inverse(y)).ell


def tree_distance(x: LeafAddress, y: LeafAddress) -> int:
    return 0 if x == y else 2 * lca_height(x, y)


def count_leaves_at_lca_height(k: int, b: int = 2) -> int:
    if k < 1:
        raise ValueError("lca height must be >= 1")
    return (b - 1) * b ** (k - 1)


def enumerate_leaves(n: int, b: int = 2) -> Iterator[LeafAddress]:
    """All b**n leaves of T_n, i.e. addresses with ell <= n."""
    for value in range(b**n):
        yield leaf_from_int(value, b)


def format_address(x: LeafAddress) -> str:
    # the identity has no digits; "e" keeps whitespace-separated dumps parseable
    return ".".join(str(d) for d in x.digits) if x.digits else "e"


def parse_address(text: str, b: int = 2) -> LeafAddress:
    text = text.strip()
    if text in ("e", ""):
        return identity(b)
    leaf = make_leaf((int(t) for t in text.split(".")), b)
    if str(leaf) != text:
        raise ValueError(f"address {text!r} is not in canonical form")
    return leaf


# -- integer-interned leaves -------------------------------------------------

def lca_height_int(x, y, b: int = 2):
    """Vectorised lca height of interned leaves; 0 where x == y."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    k = np.zeros(np.broadcast(x, y).shape, dtype=np.int64)
    x, y = np.broadcast_arrays(x, y)
    x, y = x.copy(), y.copy()
    while True:
        differ = x != y
        if not differ.any():
            return k
        k[differ] += 1
        x //= b
        y //= b


def int_to_text(value: int, b: int = 2) -> str:
    return format_address(leaf_from_int(int(value), b))


# -- explicit trees ----------------------------------------------------------

@dataclass
class RootedTree:
    """A finite tree in which every internal vertex has exactly b children.

    Vertex 0 is the apex.  ``leaf_nodes[i]`` is the tree vertex carrying graph
    vertex ``i``.
    """
    parent: np.ndarray
    children: list[np.ndarray]
    depth: np.ndarray
    leaf_nodes: np.ndarray
    b: int

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_nodes)

    def is_leaf(self, v: int) -> bool:
        return len(self.children[v]) == 0

    def ancestor(self, v: int, up: int) -> int:
        for _ in range(up):
            v = int(self.parent[v])
            if v < 0:
                return -1
        return v

    def lca(self, u: int, v: int) -> int:
        du, dv = self.depth[u], self.depth[v]
        while du > dv:
            u = int(self.parent[u]); du -= 1
        while dv > du:
            v = int(self.parent[v]); dv -= 1
        while u != v:
            u = int(self.parent[u]); v = int(self.parent[v])
        return u

    def distance(self, u: int, v: int) -> int:
        w = self.lca(u, v)
        return int(self.depth[u] + self.depth[v] - 2 * self.depth[w])


def canopy_tree(n: int, b: int = 2) -> RootedTree:
    """T_n with leaves in interned-address order.

    The vertex at height h above leaf x is ``offset[h] + x // b**h``; the apex
    (height n) is vertex 0.
    """
    counts = [b ** (n - h) for h in range(n + 1)]
    offset = {}
    pos = 0
    for h in range(n, -1, -1):
        offset[h] = pos
        pos += counts[h]
    parent = np.full(pos, -1, dtype=np.int64)
    depth = np.empty(pos, dtype=np.int64)
    children: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * pos
    for h in range(n, -1, -1):
        idx = np.arange(counts[h])
        depth[offset[h] + idx] = n - h
        if h < n:
            parent[offset[h] + idx] = offset[h + 1] + idx // b
        if h > 0:
            for a in range(counts[h]):
                children[offset[h] + a] = offset[h - 1] + a * b + np.arange(b)
    leaf_nodes = offset[0] + np.arange(b**n, dtype=np.int64)
    return RootedTree(parent, children, depth, leaf_nodes, b)


def tree_from_parents(parent: Sequence[int], b: int) -> RootedTree:
    """Build a RootedTree from a parent array in which parents precede children."""
    parent = np.asarray(parent, dtype=np.int64)
    n_nodes = len(parent)
    kids: list[list[int]] = [[] for _ in range(n_nodes)]
    depth = np.zeros(n_nodes, dtype=np.int64)
    for v in range(1, n_nodes):
        p = parent[v]
        kids[p].append(v)
        depth[v] = depth[p] + 1
    children = [np.asarray(c, dtype=np.int64) for c in kids]
    for v, c in enumerate(children):
        if len(c) not in (0, b):
            raise ValueError(f"vertex {v} has {len(c)} children, expected 0 or {b}")
    leaf_nodes = np.asarray([v for v in range(n_nodes) if not len(children[v])], dtype=np.int64)
    return RootedTree(parent, children, depth, leaf_nodes, b)
