"""Monte Carlo harness: cluster sizes, invariance, connectivity thresholds,
linkage certificates and percolation sweeps.

Connectivity experiments use a monotone coupling in lambda.  One graph is
sampled at the largest lambda of interest and every edge gets a mark uniform
on [0, lambda_max); the graph at lambda < lambda_max is the set of edges with
mark < lambda, which has exactly the right law.  A replicate then has a
critical lambda for each monotone event (connected, no isolated vertex), and
every probe of a sweep or bisection reads off the same replicates.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Iterable, Sequence

import numpy as np
from scipy import stats
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import minimum_spanning_tree

from . import __version__
from .dynamics import YuleTree, _descend, apply_star_batch, sample_async_edges, sample_yule_tree
from .edge_model import (
    GeneratingMeasure,
    _same_class_partner,
    explore_infinite_cluster,
    largest_cluster_fractions,
    sample_finite_edge_model_batch,
    sample_group_volume,
    sample_root_degrees,
)
from .group_tree import RootedTree, TreeParams, canopy_tree
from .multigraph import RootedMultiGraph, component_labels, union_find_connected
from .particle_model import EXACT, walk_endpoints
from .streams import map_replicates, replicate_rng
from .walk_constants import degree_series

EDGE = "edge"
PARTICLE = "particle"
MAFIA = "mafia"
EDGE_INF = "edge-inf"
MODELS = (EDGE, PARTICLE, MAFIA)

CONNECTED = "connected"
NO_ISOLATED = "no_isolated"

CSV_FIELDS = ["model", "b", "size", "lambda", "replicate", "seed", "cluster_size",
              "edges", "connected", "isolated", "truncated"]


class EstimatorRefused(RuntimeError):
    """An estimator declined to report a value (truncation, sparse bins)."""


def _fmt_lambda(lam: float) -> str:
    return f"{lam:.12g}"


@dataclass
class SweepRecord:
    model: str
    b: int
    size: int | float | str
    lam: float
    replicate: int
    seed: int
    cluster_size: int
    edges: int
    connected: bool
    isolated: int
    truncated: bool

    def __post_init__(self):
        if self.cluster_size < 1:
            raise ValueError("cluster size must be >= 1")

    def row(self) -> list[str]:
        return [self.model, str(self.b), str(self.size), _fmt_lambda(self.lam), str(self.replicate),
                str(self.seed), str(self.cluster_size), str(self.edges), str(int(self.connected)),
                str(self.isolated), str(int(self.truncated))]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return {k: d[k] for k in CSV_FIELDS}


@dataclass
class ThresholdEstimate:
    lambda_star: float
    ci: tuple[float, float]
    target: float
    replicates: int
    se: float
    event: str = CONNECTED
    probes: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.ci[0] <= self.lambda_star <= self.ci[1]:
            raise ValueError("confidence interval must contain the estimate")


# -- marked samples and critical lambdas ------------------------------------------

@dataclass
class MarkedGraph:
    """Graph sampled at lam_max with uniform edge marks on [0, lam_max)."""
    n_vertices: int
    u: np.ndarray
    v: np.ndarray
    marks: np.ndarray
    root: int = 0
    lam_max: float = 0.0
    tree: object = field(default=None, repr=False)

    def at(self, lam: float) -> RootedMultiGraph:
        keep = self.marks < lam
        return RootedMultiGraph.from_edges(self.n_vertices, self.u[keep], self.v[keep], self.root)

    def stats_at(self, lam: float) -> tuple[bool, int, int, int]:
        """(connected, isolated count, root cluster size, root cluster edge count) at lam."""
        keep = (self.marks < lam) & (self.u != self.v)
        u, v = self.u[keep], self.v[keep]
        count, lab = component_labels(self.n_vertices, u, v)
        deg = np.bincount(np.concatenate([u, v]), minlength=self.n_vertices)
        in_root = lab == lab[self.root]
        return (count == 1, int(np.count_nonzero(deg == 0)), int(np.count_nonzero(in_root)),
                int(np.count_nonzero(in_root[u])))


def _uniform_marks(n: int, lam_max: float, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, lam_max, size=n)


def sample_marked(model: str, size, lam_max: float, b: int, rng: np.random.Generator) -> MarkedGraph:
    if lam_max < 0:
        raise ValueError("lambda must be nonnegative")
    if model == EDGE:
        batch = sample_finite_edge_model_batch(int(size), lam_max, b, 1, rng)
        V = b ** int(size)
        return MarkedGraph(V, batch.u, batch.v, _uniform_marks(len(batch.u), lam_max, rng), 0, lam_max)
    if model == PARTICLE:
        n = int(size)
        V = b**n
        starts = np.repeat(np.arange(V, dtype=np.int64), rng.poisson(lam_max / 2.0, size=V))
        ends, _ = walk_endpoints(starts, n, b, rng, EXACT)
        marks = _uniform_marks(len(starts), lam_max, rng)
        keep = starts != ends
        return MarkedGraph(V, starts[keep], ends[keep], marks[keep], 0, lam_max)
    if model == MAFIA:
        tree = sample_yule_tree(float(size), b, rng)
        u, v = sample_async_edges(tree, lam_max, rng)
        root_node = _descend(tree.children, np.array([0]), b, rng)[0]
        root = int(np.searchsorted(tree.leaves, root_node))
        return MarkedGraph(tree.n_leaves, u, v, _uniform_marks(len(u), lam_max, rng), root, lam_max, tree)
    raise ValueError(f"unknown model {model!r}")


def critical_lambdas(mg: MarkedGraph) -> tuple[float, float]:
    """Smallest lambda at which the coupled graph is connected / has no isolated vertex.

    Connectivity: the bottleneck (largest mark) of a minimum spanning forest.
    Isolation: the largest over vertices of the smallest incident mark.
    Either is inf if the event fails even at lam_max.
    """
    n = mg.n_vertices
    if n == 1:
        return 0.0, math.inf
    keep = mg.u != mg.v
    lo = np.minimum(mg.u[keep], mg.v[keep])
    hi = np.maximum(mg.u[keep], mg.v[keep])
    w = mg.marks[keep]
    first_mark = np.full(n, np.inf)
    np.minimum.at(first_mark, lo, w)
    np.minimum.at(first_mark, hi, w)
    iso = float(first_mark.max())
    count, _ = component_labels(n, lo, hi)
    if count > 1:
        return math.inf, iso
    order = np.argsort(w, kind="stable")
    key = lo[order] * n + hi[order]
    _, first = np.unique(key, return_index=True)
    sel = order[first]
    # explicit zeros would be read as missing edges
    weights = np.maximum(w[sel], np.finfo(float).tiny)
    mst = minimum_spanning_tree(coo_matrix((weights, (lo[sel], hi[sel])), shape=(n, n)).tocsr())
    return float(mst.data.max()), iso


def _threshold_replicate(index: int, seed: int, model: str, size, lam_max: float, b: int):
    mg = sample_marked(model, size, lam_max, b, np.random.default_rng(seed))
    return critical_lambdas(mg)


def _sweep_replicate(index: int, seed: int, model: str, size, grid: tuple, b: int) -> list[SweepRecord]:
    mg = sample_marked(model, size, max(grid), b, np.random.default_rng(seed))
    out = []
    for lam in grid:
        conn, iso, csize, edges = mg.stats_at(lam)
        out.append(SweepRecord(model, b, size, lam, index, seed, csize, edges, conn, iso, False))
    return out


# -- sweeps and thresholds ----------------------------------------------------------

@dataclass
class SweepPoint:
    lam: float
    p_connected: float
    se_connected: float
    p_no_isolated: float
    se_no_isolated: float
    n: int


def _binom_se(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n) if n else math.nan


def parse_grid(text: str) -> list[float]:
    """'a:b:step' (inclusive, tolerant to rounding) or a comma-separated list."""
    if ":" in text:
        a, c, step = (float(x) for x in text.split(":"))
        if step <= 0 or c < a:
            raise ValueError(f"bad grid {text!r}")
        count = int(math.floor((c - a) / step + 1e-9)) + 1
        return [round(a + i * step, 12) for i in range(count)]
    grid = [float(x) for x in text.split(",") if x.strip()]
    if not grid:
        raise ValueError("empty grid")
    return grid


def sweep_records(model: str, size, lam_grid: Sequence[float], b: int, N: int, seed: int = 0,
                  workers: int = 1) -> list[SweepRecord]:
    grid = tuple(float(x) for x in lam_grid)
    if not grid or any(q <= p for p, q in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be nonempty and strictly increasing")
    if N < 1:
        raise ValueError("N must be >= 1")
    fn = partial(_sweep_replicate, model=model, size=size, grid=grid, b=b)
    per_rep = map_replicates(fn, seed, range(N), workers)
    # order: by lambda, then replicate
    return [per_rep[i][j] for j in range(len(grid)) for i in range(N)]


def summarize_sweep(records: Iterable[SweepRecord]) -> list[SweepPoint]:
    by_lam: dict[float, list[SweepRecord]] = {}
    for r in records:
        by_lam.setdefault(r.lam, []).append(r)
    out = []
    for lam in sorted(by_lam):
        rs = by_lam[lam]
        n = len(rs)
        pc = sum(r.connected for r in rs) / n
        pi = sum(r.isolated == 0 for r in rs) / n
        out.append(SweepPoint(lam, pc, _binom_se(pc, n), pi, _binom_se(pi, n), n))
    return out


def sweep_connectivity(model: str, size, lam_grid: Sequence[float], b: int = 2, N: int = 100,
                       seed: int = 0, workers: int = 1) -> list[SweepPoint]:
    return summarize_sweep(sweep_records(model, size, lam_grid, b, N, seed, workers))


def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def isotonic_fit(y: Sequence[float], w: Sequence[float]) -> np.ndarray:
    """Pool-adjacent-violators fit of a nondecreasing sequence."""
    blocks: list[list[float]] = []  # [value, weight, count]
    for yi, wi in zip(y, w):
        blocks.append([float(yi), float(wi), 1])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            v2, w2, c2 = blocks.pop()
            v1, w1, c1 = blocks.pop()
            blocks.append([(v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, c1 + c2])
    return np.concatenate([[v] * c for v, _, c in blocks]) if blocks else np.empty(0)


def check_monotone_probes(probes: Sequence[tuple[float, int, int]], z: float = 3.0) -> None:
    """Raise if any raw probe sits more than z SE from the isotonic fit."""
    if not probes:
        return
    ps = sorted(probes)
    y = [s / n for _, s, n in ps]
    w = [n for _, _, n in ps]
    fit = isotonic_fit(y, w)
    for (lam, s, n), p, f in zip(ps, y, fit):
        se = math.sqrt(max(f * (1 - f), 0.25 / n) / n)
        if abs(p - f) > z * se:
            raise EstimatorRefused(f"probe at lambda={lam} violates monotonicity by more than {z} SE")


def _inverse_ecdf_interval(sorted_th: np.ndarray, target: float, z: float) -> tuple[float, float]:
    """Lambdas whose success count keeps ``target`` inside the Wilson interval."""
    n = len(sorted_th)
    ks = np.arange(n + 1)
    ok = np.array([lo <= target <= hi for lo, hi in (wilson_interval(int(k), n, z) for k in ks)])
    good = np.flatnonzero(ok)
    k_lo, k_hi = int(good[0]), int(good[-1])
    # count(th <= lam) == k holds for th_(k) <= lam < th_(k+1) (1-based order statistics)
    left = sorted_th[k_lo - 1] if k_lo >= 1 else -math.inf
    right = sorted_th[k_hi] if k_hi < n else math.inf
    return float(left), float(right)


def bisect_from_samples(thresholds: Sequence[float], lo: float, hi: float, target: float = 0.5,
                        tol: float | None = None, event: str = CONNECTED, max_iter: int = 60) -> ThresholdEstimate:
    """Bisection on the coupled success curve lambda -> P(threshold <= lambda)."""
    th = np.sort(np.asarray(thresholds, dtype=float))
    n = len(th)
    if n == 0:
        raise ValueError("need at least one replicate per probe")
    if not 0 < target < 1:
        raise ValueError("target must lie in (0, 1)")
    if not lo < hi:
        raise ValueError("need lo < hi")

    def probe(lam):
        s = int(np.searchsorted(th, lam, side="right"))
        probes.append((lam, s, n))
        return s

    probes: list[tuple[float, int, int]] = []
    s_lo, s_hi = probe(lo), probe(hi)
    if not (s_lo / n < target < s_hi / n):
        raise ValueError(f"interval [{lo}, {hi}] does not bracket target {target}: "
                         f"success {s_lo / n:.3f} .. {s_hi / n:.3f}")
    tol = (hi - lo) * 1e-4 if tol is None else tol
    a, c = lo, hi
    mid = 0.5 * (a + c)
    for _ in range(max_iter):
        mid = 0.5 * (a + c)
        w_lo, w_hi = wilson_interval(probe(mid), n)
        if w_lo > target:
            c = mid
        elif w_hi < target:
            a = mid
        else:
            break
        if c - a < tol:
            mid = 0.5 * (a + c)
            break
    check_monotone_probes(probes)
    ci = _inverse_ecdf_interval(th, target, 1.96)
    one = _inverse_ecdf_interval(th, target, 1.0)
    ci = (min(ci[0], mid), max(ci[1], mid))
    se = 0.5 * (min(one[1], hi) - max(one[0], lo))
    return ThresholdEstimate(mid, ci, target, n, se, event, probes)


def threshold_samples(model: str, size, lam_max: float, b: int, N: int, seed: int = 0,
                      workers: int = 1) -> np.ndarray:
    """Array of shape (N, 2): per replicate critical lambda for connectivity and for no isolated vertex."""
    if N < 1:
        raise ValueError("N_per_probe must be >= 1")
    fn = partial(_threshold_replicate, model=model, size=size, lam_max=lam_max, b=b)
    return np.asarray(map_replicates(fn, seed, range(N), workers), dtype=float).reshape(N, 2)


def default_bracket(model: str, size, b: int) -> tuple[float, float]:
    if model == EDGE:
        guess = int(size) * math.log(b)
    elif model == PARTICLE:
        guess = (b + 1) / (b - 1) * math.log(b) * int(size)
    elif model == MAFIA:
        guess = (b - 1) * float(size)
    else:
        raise ValueError(f"unknown model {model!r}")
    return 0.25 * guess, 2.0 * guess + 5.0


def bisect_threshold(model: str, size, b: int = 2, target: float = 0.5, N_per_probe: int = 200,
                     seed: int = 0, lo: float | None = None, hi: float | None = None,
                     event: str = CONNECTED, workers: int = 1) -> ThresholdEstimate:
    return crossing_estimates(model, size, b, target, N_per_probe, seed, lo, hi, workers, events=(event,))[event]


def crossing_estimates(model: str, size, b: int = 2, target: float = 0.5, N_per_probe: int = 200,
                       seed: int = 0, lo: float | None = None, hi: float | None = None, workers: int = 1,
                       events: Sequence[str] = (CONNECTED, NO_ISOLATED)) -> dict[str, ThresholdEstimate]:
    """Threshold estimates for several events from one set of coupled replicates."""
    if N_per_probe < 1:
        raise ValueError("N_per_probe must be >= 1")
    d_lo, d_hi = default_bracket(model, size, b)
    lo = d_lo if lo is None else lo
    hi = d_hi if hi is None else hi
    samples = threshold_samples(model, size, hi, b, N_per_probe, seed, workers)
    column = {CONNECTED: 0, NO_ISOLATED: 1}
    return {e: bisect_from_samples(samples[:, column[e]], lo, hi, target, event=e) for e in events}


# -- cluster size ------------------------------------------------------------------------

@dataclass
class ChiEstimate:
    lam: float
    mean: float
    se: float
    ci: tuple[float, float]
    n_used: int
    n_truncated: int
    heavy_tail: bool
    top_share: float
    quantiles: dict
    records: list = field(default_factory=list, repr=False)


def _chi_replicate(index: int, seed: int, lam: float, b: int, cap: int):
    c = explore_infinite_cluster(lam, b, np.random.default_rng(seed), cap)
    return SweepRecord(EDGE_INF, b, "inf", lam, index, seed, c.size, c.graph.edge_total, True,
                       int(c.size == 1), c.truncated)


def _run_with_refusal(fn, seed: int, N: int, workers: int, max_truncated_frac: float, what: str):
    """Run replicates in index-ordered blocks, refusing as soon as truncation exceeds the limit."""
    limit = max_truncated_frac * N
    block = max(16, 4 * workers)
    out = []
    n_trunc = 0
    for start in range(0, N, block):
        part = map_replicates(fn, seed, range(start, min(N, start + block)), workers)
        out.extend(part)
        n_trunc += sum(_is_truncated(r) for r in part)
        if n_trunc > limit:
            raise EstimatorRefused(f"{what}: {n_trunc} truncated explorations among the first "
                                   f"{len(out)} (limit {max_truncated_frac:.0%} of {N})")
    return out


def _is_truncated(r) -> bool:
    return r.truncated if isinstance(r, SweepRecord) else bool(r[1])


def _tail_summary(sizes: np.ndarray) -> tuple[bool, float, dict]:
    srt = np.sort(sizes)[::-1]
    top = max(1, int(math.ceil(0.01 * len(srt))))
    share = float(srt[:top].sum() / srt.sum())
    qs = {str(q): float(np.quantile(sizes, q)) for q in (0.5, 0.9, 0.99)}
    return share > 0.5, share, qs


def estimate_chi(lam: float, b: int = 2, N: int = 1000, seed: int = 0, cap: int = 10**6,
                 workers: int = 1, max_truncated_frac: float = 0.01) -> ChiEstimate:
    """Mean size of the identity's cluster in G_inf(lambda) over N exact explorations."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    fn = partial(_chi_replicate, lam=lam, b=b, cap=cap)
    records = _run_with_refusal(fn, seed, N, workers, max_truncated_frac, f"chi at lambda={lam:g}")
    sizes = np.asarray([r.cluster_size for r in records if not r.truncated], dtype=float)
    mean = float(sizes.mean())
    se = float(sizes.std(ddof=1) / math.sqrt(len(sizes))) if len(sizes) > 1 else 0.0
    heavy, share, qs = _tail_summary(sizes)
    return ChiEstimate(lam, mean, se, (mean - 1.96 * se, mean + 1.96 * se), len(sizes),
                       len(records) - len(sizes), heavy, share, qs, records)


@dataclass
class ChiTrend:
    lams: list[float]
    means: np.ndarray
    ses: np.ndarray
    diff_means: np.ndarray
    diff_ses: np.ndarray
    slope: float
    slope_se: float
    growth_fit: np.ndarray  # log chi / (lambda log lambda), reported only
    n_used: int
    n_truncated: int


def _chi_coupled_replicate(index: int, seed: int, lams: tuple, b: int, cap: int):
    c = explore_infinite_cluster(max(lams), b, np.random.default_rng(seed), cap)
    if c.truncated:
        return None, True
    return [c.size_at(lam) if lam < max(lams) else c.size for lam in lams], False


def chi_trend(lams: Sequence[float], b: int = 2, N: int = 500, seed: int = 0, cap: int = 10**6,
              workers: int = 1, max_truncated_frac: float = 0.01) -> ChiTrend:
    """Coupled estimates of chi on a lambda grid: one exploration at the largest
    lambda per replicate, thinned by edge marks for the others."""
    lams = tuple(sorted(float(x) for x in lams))
    fn = partial(_chi_coupled_replicate, lams=lams, b=b, cap=cap)
    out = _run_with_refusal(fn, seed, N, workers, max_truncated_frac, f"chi trend at lambda={lams[-1]:g}")
    sizes = np.asarray([s for s, tr in out if not tr], dtype=float)
    means = sizes.mean(axis=0)
    ses = sizes.std(axis=0, ddof=1) / math.sqrt(len(sizes))
    diffs = np.diff(sizes, axis=1)
    diff_means = diffs.mean(axis=0)
    diff_ses = diffs.std(axis=0, ddof=1) / math.sqrt(len(sizes))
    x = np.asarray(lams)
    y = np.log(means)
    wts = (means / np.maximum(ses, 1e-12)) ** 2
    xm = np.average(x, weights=wts)
    sxx = float(np.sum(wts * (x - xm) ** 2))
    slope = float(np.sum(wts * (x - xm) * (y - np.average(y, weights=wts))) / sxx) if sxx > 0 else math.nan
    slope_se = math.sqrt(1.0 / sxx) if sxx > 0 else math.nan
    with np.errstate(divide="ignore", invalid="ignore"):
        growth = np.where(x > 1, y / (x * np.log(x)), np.nan)
    return ChiTrend(list(lams), means, ses, diff_means, diff_ses, slope, slope_se, growth,
                    len(sizes), len(out) - len(sizes))


# -- star invariance ------------------------------------------------------------------------

@dataclass
class InvarianceResult:
    p_value: float
    statistic: float
    dof: int
    n_bins: int
    table: np.ndarray = field(repr=False, default=None)


def _root_stats(batch) -> tuple[np.ndarray, np.ndarray]:
    return batch.root_component_stats()


def _pooled_table(a: np.ndarray, c: np.ndarray, min_expected: float = 5.0) -> np.ndarray:
    """2 x K contingency table over joint categories, rare categories pooled."""
    cats, inv = np.unique(np.concatenate([a, c]), return_inverse=True)
    counts = np.zeros((2, len(cats)), dtype=np.int64)
    np.add.at(counts[0], inv[: len(a)], 1)
    np.add.at(counts[1], inv[len(a):], 1)
    total = counts.sum()
    col = counts.sum(axis=0)
    row_min = counts.sum(axis=1).min()
    expected_min = col * row_min / total
    order = np.argsort(-col, kind="stable")
    keep = order[expected_min[order] >= min_expected]
    rest = np.setdiff1d(np.arange(len(cats)), keep)
    cols = [counts[:, j] for j in np.sort(keep)]
    if len(rest):
        pooled = counts[:, rest].sum(axis=1)
        if pooled.sum() * row_min / total >= min_expected or not cols:
            cols.append(pooled)
        else:
            cols[-1] = cols[-1] + pooled
    table = np.stack(cols, axis=1)
    if len(cats) > 1 and table.shape[1] < 2:
        raise EstimatorRefused("too few samples to keep two histogram bins; increase N")
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / total
    if table.shape[1] > 1 and expected.min() < min_expected:
        raise EstimatorRefused("histogram bins have expected count below 5; increase N")
    return table


def compare_joint_histograms(a: np.ndarray, c: np.ndarray) -> InvarianceResult:
    """Chi-square homogeneity test of two samples of category codes."""
    table = _pooled_table(a, c)
    if table.shape[1] < 2:
        return InvarianceResult(1.0, 0.0, 0, table.shape[1], table)
    chi2, p, dof, _ = stats.chi2_contingency(table, correction=False)
    return InvarianceResult(float(p), float(chi2), int(dof), table.shape[1], table)


def _encode(sizes: np.ndarray, edges: np.ndarray) -> np.ndarray:
    return sizes.astype(np.int64) * (1 << 31) + edges.astype(np.int64)


def invariance_samples(n: int, lam: float, b: int, N: int, seed: int = 0, lam_other: float | None = None,
                       chunk: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Joint (size, edge count) codes of star(C_n(lambda)) and of C_(n+1)(lam_other)."""
    lam_other = lam if lam_other is None else lam_other
    side_a, side_b = [], []
    for j, start in enumerate(range(0, N, chunk)):
        m = min(chunk, N - start)
        rng_a = replicate_rng(seed, (j, 0))
        rng_b = replicate_rng(seed, (j, 1))
        base = sample_finite_edge_model_batch(n, lam, b, m, rng_a).root_components()
        star = apply_star_batch(base, lam, b, rng_a)
        sizes = star.sizes
        edges = np.bincount(star.owner()[star.u], minlength=star.n_graphs)
        side_a.append(_encode(sizes, edges))
        direct = sample_finite_edge_model_batch(n + 1, lam_other, b, m, rng_b)
        s2, e2 = direct.root_component_stats()
        side_b.append(_encode(s2, e2))
    return np.concatenate(side_a), np.concatenate(side_b)


def invariance_test(n: int, lam: float, b: int = 2, N: int = 100_000, seed: int = 0,
                    lam_other: float | None = None) -> InvarianceResult:
    """p-value for star(root component of G_n(lambda)) ~ root component of G_(n+1)(lambda).

    ``lam_other`` replaces lambda on the G_(n+1) side (negative control).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if N < 1:
        raise ValueError("N must be >= 1")
    a, c = invariance_samples(n, lam, b, N, seed, lam_other)
    return compare_joint_histograms(a, c)


# -- linkage certificate ------------------------------------------------------------------

def as_rooted_tree(tree) -> RootedTree:
    if isinstance(tree, RootedTree):
        return tree
    if isinstance(tree, YuleTree):
        return tree.to_rooted_tree()
    if isinstance(tree, TreeParams):
        if tree.n is None:
            raise ValueError("certificate needs a finite tree")
        return canopy_tree(tree.n, tree.b)
    raise TypeError(f"cannot use {type(tree).__name__} as a tree")


def _test_mode() -> bool:
    return os.environ.get("CANOPY_TEST_MODE", "") not in ("", "0")


def linkage_certificate(G: RootedMultiGraph, tree, k: int, check: bool | None = None) -> bool:
    """Sufficient condition for connectivity of a graph on the leaves of a tree.

    Sibling set X = children of an internal vertex p.  H_X joins two members
    when some edge runs between their descendants.  X is strongly linked when
    H_X is connected, and weakly linked when H_X has two components and some
    k-uncle z of X is linked to members of both.  The certificate holds when
    (i) every X is strongly or weakly linked, (ii) no two k-cousin sibling
    sets are both not strongly linked, and (iii) every X within the top k
    layers is strongly linked.

    Two sets count as k-cousins when some members x, y lie in different child
    subtrees of lca(x, y) and each is within k+1 levels of it.  This includes
    every pair the usual member-wise definition does, so (ii) is at least as
    strict and the certificate stays sound.
    """
    T = as_rooted_tree(tree)
    if G.n_vertices != T.n_leaves:
        raise ValueError(f"graph has {G.n_vertices} vertices but the tree has {T.n_leaves} leaves")
    check = _test_mode() if check is None else check
    result = _certificate(G, T, k)
    if check and result and not union_find_connected(G.n_vertices, G.u, G.v):
        raise AssertionError("linkage certificate holds for a disconnected graph")
    return result


def _certificate(G: RootedMultiGraph, T: RootedTree, k: int) -> bool:
    b = T.b
    nn = T.n_nodes
    parent = np.asarray(T.parent, dtype=np.int64)
    depth = np.asarray(T.depth, dtype=np.int64)
    kids = np.full((nn, b), -1, dtype=np.int64)
    for v, c in enumerate(T.children):
        if len(c):
            kids[v] = c
    internal = np.flatnonzero(kids[:, 0] >= 0)
    if not len(internal):
        return G.n_vertices == 1

    a = T.leaf_nodes[G.u]
    c = T.leaf_nodes[G.v]
    ca, cc = a.copy(), c.copy()
    for x, y in ((ca, cc), (cc, ca)):
        deeper = np.flatnonzero(depth[x] > depth[y])
        while len(deeper):
            x[deeper] = parent[x[deeper]]
            deeper = deeper[depth[x[deeper]] > depth[y[deeper]]]
    apart = np.flatnonzero(parent[ca] != parent[cc])
    while len(apart):
        ca[apart] = parent[ca[apart]]
        cc[apart] = parent[cc[apart]]
        apart = apart[parent[ca[apart]] != parent[cc[apart]]]

    _, lab = component_labels(nn, ca, cc)
    rows = np.sort(lab[kids[internal]], axis=1)
    n_comp = 1 + np.count_nonzero(np.diff(rows, axis=1), axis=1)
    strong = n_comp == 1

    # (iii) top k layers: members at depth <= k
    if np.any(~strong & (depth[internal] + 1 <= k)):
        return False
    # (i) part one: at most two components anywhere
    if np.any(n_comp > 2):
        return False
    weak_needed = internal[n_comp == 2]
    if not len(weak_needed):
        return True

    member = np.zeros(nn, dtype=bool)
    member[kids[weak_needed].ravel()] = True
    rec_p, rec_z, rec_l = [], [], []
    for leaf, top, z in ((a, ca, cc), (c, cc, ca)):
        cur = leaf.copy()
        live = np.arange(len(cur))
        while len(live):
            d = depth[cur[live]] - depth[top[live]]
            hit = live[(d >= 1) & (d <= k) & member[cur[live]]]
            rec_p.append(parent[cur[hit]])
            rec_z.append(z[hit])
            rec_l.append(lab[cur[hit]])
            live = live[d > 1]
            cur[live] = parent[cur[live]]
    P = np.concatenate(rec_p)
    Z = np.concatenate(rec_z)
    Lb = np.concatenate(rec_l)
    weak = set()
    if len(P):
        trip = np.unique(np.stack([P, Z, Lb], axis=1), axis=0)
        pz = trip[:, 0] * nn + trip[:, 1]
        same = np.flatnonzero(pz[1:] == pz[:-1])
        weak = set(trip[same, 0].tolist())
    if any(p not in weak for p in weak_needed.tolist()):
        return False

    # (ii) two not-strongly-linked sets that are k-cousins
    buckets: dict[int, list[int]] = {}
    for p in weak_needed.tolist():
        anc, toward = p, -1
        for _ in range(k + 1):
            buckets.setdefault(anc, []).append(toward)
            toward, anc = anc, int(parent[anc])
            if anc < 0:
                break
    for entries in buckets.values():
        if len(entries) >= 2 and (-1 in entries or len(set(entries)) > 1):
            return False
    return True


# -- isolated vertices ------------------------------------------------------------------

def isolated_bound(n_vertices: int, q: float) -> float:
    return 2.0 / (2.0 + n_vertices * q)


def isolated_bound_check(n_vertices: int, q: float, empirical_p_no_isolated: float,
                         n_samples: int | None = None) -> bool:
    """Is the empirical P(no isolated vertex) within 3 SE of the matching bound 2/(2 + n q)?"""
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    p = empirical_p_no_isolated
    se = _binom_se(p, n_samples) if n_samples else 0.0
    return p <= isolated_bound(n_vertices, q) + 3 * se


def lambda_for_isolation(n: int, nq: float, b: int = 2) -> float:
    """lambda with b**n * exp(-lambda (1 - b**-n)) = nq in the edge model on T_n."""
    q = nq / b**n
    if not 0 < q <= 1:
        raise ValueError("need 0 < nq <= b**n")
    return -math.log(q) / (1.0 - float(b) ** (-n))


# -- percolation and degrees --------------------------------------------------------------

@dataclass
class PercolationPoint:
    k: int
    mean_fraction: float
    se: float
    mean_root_fraction: float
    n: int


def _percolation_replicate(index, seed: int, measure: GeneratingMeasure, lam: float, k: int):
    g = sample_group_volume(measure, lam, k, np.random.default_rng(seed))
    _, lab = g.components()
    sizes = np.bincount(lab)
    return sizes.max() / g.n_vertices, sizes[lab[0]] / g.n_vertices


def percolation_sweep(measure: GeneratingMeasure, lam: float, k_grid: Sequence[int], N: int = 10,
                      seed: int = 0, workers: int = 1) -> list[PercolationPoint]:
    ks = [int(k) for k in k_grid]
    if any(q <= p for p, q in zip(ks, ks[1:])):
        raise ValueError("k grid must be increasing")
    out = []
    for k in ks:
        fn = partial(_percolation_replicate, measure=measure, lam=lam, k=k)
        res = np.asarray(map_replicates(fn, seed, [(k, i) for i in range(N)], workers))
        f = res[:, 0]
        se = float(f.std(ddof=1) / math.sqrt(N)) if N > 1 else 0.0
        out.append(PercolationPoint(k, float(f.mean()), se, float(res[:, 1].mean()), N))
    return out


@dataclass
class DegreeRow:
    lam: float
    series: float
    simple_mean: float
    simple_se: float
    multi_mean: float
    multi_se: float
    ratio: float  # series / sqrt(lambda)


def degree_check(lam_grid: Sequence[float], b: int = 2, N: int = 10_000, seed: int = 0) -> list[DegreeRow]:
    rows = []
    for j, lam in enumerate(lam_grid):
        if not lam > 0:
            raise ValueError("degree check needs lambda > 0")
        rng = replicate_rng(seed, j)
        # chunks keep about 4e6 root edges in memory at large lambda
        chunk = max(1, min(N, int(4e6 / lam)))
        parts = [sample_root_degrees(lam, b, min(chunk, N - s), rng) for s in range(0, N, chunk)]
        multi = np.concatenate([m for m, _ in parts])
        simple = np.concatenate([d for _, d in parts])
        d = degree_series(lam, b)
        rows.append(DegreeRow(lam, d, float(simple.mean()), float(simple.std(ddof=1) / math.sqrt(N)),
                              float(multi.mean()), float(multi.std(ddof=1) / math.sqrt(N)), d / math.sqrt(lam)))
    return rows


# -- output ----------------------------------------------------------------------------------

def write_csv(records: Iterable[SweepRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow(r.row())


def records_csv(records: Iterable[SweepRecord]) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


def write_json(records: Iterable[SweepRecord], fh, master_seed: int, wall_time: float | None = None,
               extra: dict | None = None) -> None:
    meta = {"type": "run", "master_seed": int(master_seed), "version": __version__}
    if wall_time is not None:
        meta["wall_time"] = round(wall_time, 3)
    if extra:
        meta.update(extra)
    payload = {"run": meta, "records": [r.as_dict() for r in records]}
    json.dump(payload, fh, indent=1, sort_keys=False)
    fh.write("\n")
