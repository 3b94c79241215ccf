"""Closed-form walk quantities on the canopy tree, with certified truncation.

Every series here has terms that eventually shrink by a fixed geometric ratio,
so a partial sum ``S`` together with the bound on the remaining tail gives an
interval ``[S, S + tail]`` that contains the exact value.  Summation stops once
the tail is below ``tol * S``.

Notation used in names:

* ``zeta(k)``      probability that a walk from a leaf of T_inf ends at a given
                   leaf whose lca with the start has height k;
* ``xi_inf(k)``    expected number (per unit lambda) of particle-model edges
                   leaving the leaves below a height-k vertex of T_inf;
* ``xi_fin(k, n)`` the same on T_n;
* ``xi_hat(k, n)`` the edge-model analogue on T_n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

DEFAULT_TOL = 1e-12
CRIT = "crit"


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def __contains__(self, value: float) -> bool:
        return self.lo <= value <= self.hi


def _check_b(b: int) -> None:
    if b < 2:
        raise ValueError(f"branching factor must be >= 2, got {b}")


def _check_tol(tol: float) -> None:
    if not tol > 0:
        raise ValueError("tol must be positive")


def _endpoint_term(j: int, b: int) -> float:
    # probability of ending at one fixed leaf among those first reached at max height j
    return (b - 1) ** 2 / ((b ** (j + 1) - 1) * (b**j - 1))


def zeta_interval(k: int, b: int = 2, tol: float = DEFAULT_TOL) -> Interval:
    if k < 1:
        raise ValueError("zeta is defined for k >= 1")
    _check_b(b)
    _check_tol(tol)
    ratio = 1.0 / b**2
    total = 0.0
    j = k
    while True:
        term = _endpoint_term(j, b)
        total += term
        # later terms shrink by less than b**-2 each
        tail = _endpoint_term(j + 1, b) / (1.0 - ratio)
        if tail <= tol * total:
            return Interval(total, total + tail)
        j += 1


def zeta(k: int, b: int = 2, tol: float = DEFAULT_TOL) -> float:
    return zeta_interval(k, b, tol).mid


def zeta_bounds(h: int, b: int = 2) -> tuple[float, float]:
    if h < 1:
        raise ValueError("h must be >= 1")
    _check_b(b)
    c = (b - 1) / (b + 1)
    lower = c * (b ** (1 - 2 * h) + b ** (1 - 3 * h))
    upper = (1 + 1 / (b**h - 1)) * (1 + 1 / (b ** (h + 1) - 1)) * c * b ** (1 - 2 * h)
    return lower, upper


def _xi_term(k: int, j: int, b: int) -> float:
    return (b - 1) ** 2 * b**k * (b**j - b**k) / ((b ** (j + 1) - 1) * (b**j - 1))


def xi_inf_interval(k: int, b: int = 2, tol: float = DEFAULT_TOL) -> Interval:
    """Xi_k written as a single series over the walk's maximal height j > k.

    Swapping the order of the double sum b**k (b-1) sum_{h>k} b**(h-1) zeta_h
    gives sum_{j>k} b**k (b**j - b**k) * term_j.  With m = j - k the ratio of
    consecutive terms is below (1 + (b-1) / (b (b**m - 1))) / b, which tends
    to 1/b and is at most (b+1)/b**2 < 1.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    _check_b(b)
    _check_tol(tol)
    total = 0.0
    j = k + 1
    while True:
        total += _xi_term(k, j, b)
        nxt = _xi_term(k, j + 1, b)
        m = j + 1 - k
        ratio = (1.0 + (b - 1) / (b * (float(b) ** m - 1))) / b
        tail = nxt / (1.0 - ratio)
        if tail <= tol * total:
            return Interval(total, total + tail)
        j += 1


def xi_inf(k: int, b: int = 2, tol: float = DEFAULT_TOL) -> float:
    return xi_inf_interval(k, b, tol).mid


def twothirds_bounds(k: int, b: int = 2) -> tuple[float, float]:
    c = (b - 1) / (b + 1)
    lower = c * (1 + b ** (-k) / (b + 1))
    upper = c * (1 + 1 / (b ** (k + 1) - 1)) * (1 + 1 / (b ** (k + 2) - 1))
    return lower, upper


def xi_fin_interval(k: int, n: int, b: int = 2, tol: float = DEFAULT_TOL) -> Interval:
    """xi_k^(n) = Xi_k - b**(2k-2n) * Xi_n.

    The correction (b-1) sum_{h>n} b**(h-n+2k-1) zeta_h collapses to
    b**(2k-2n) Xi_n after the same reordering used in :func:`xi_inf_interval`.
    """
    if not n > k >= 0:
        raise ValueError(f"need n > k >= 0, got k={k}, n={n}")
    a = xi_inf_interval(k, b, tol)
    c = xi_inf_interval(n, b, tol)
    scale = float(b) ** (2 * k - 2 * n)
    return Interval(a.lo - scale * c.hi, a.hi - scale * c.lo)


def xi_fin(k: int, n: int, b: int = 2, tol: float = DEFAULT_TOL) -> float:
    return xi_fin_interval(k, n, b, tol).mid


def xi_hat(k: int, n: int, b: int = 2) -> float:
    if not n > k >= 0:
        raise ValueError(f"need n > k >= 0, got k={k}, n={n}")
    _check_b(b)
    return 1.0 - float(b) ** (k - n)


def sigma_crit(b: int = 2) -> float:
    _check_b(b)
    return (b + 1) / (b - 1) * math.log(b)


def sigma_thresholds(k, b: int = 2, tol: float = DEFAULT_TOL) -> float:
    """Threshold constant sigma_k = log(b) / Xi_k, or sigma_crit for k=CRIT."""
    if k == CRIT:
        return sigma_crit(b)
    return math.log(b) / xi_inf(int(k), b, tol)


def degree_series_interval(lam: float, b: int = 2, tol: float = DEFAULT_TOL) -> Interval:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    _check_b(b)
    _check_tol(tol)
    if lam == 0:
        return Interval(0.0, 0.0)
    total = 0.0
    h = 1
    while True:
        total += (b - 1) * b ** (h - 1) * -math.expm1(-lam * float(b) ** (1 - 2 * h))
        # 1 - exp(-x) <= x bounds the remainder by lam * b**-h
        tail = lam * float(b) ** (-h)
        if tail <= tol * total:
            return Interval(total, total + tail)
        h += 1


def degree_series(lam: float, b: int = 2, tol: float = DEFAULT_TOL) -> float:
    return degree_series_interval(lam, b, tol).mid


def double_edge_probability(b: int = 2) -> float:
    """P(both root edges go to the same leaf | root multi-degree 2) in G(lambda).

    Equals sum_k (b-1) b**(k-1) b**(2-4k) = b (b-1) / (b**3 - 1) in closed form.
    """
    _check_b(b)
    return b * (b - 1) / (b**3 - 1)


@dataclass
class WalkConstants:
    """Cached tables of zeta_h and Xi_k for one branching factor."""
    b: int = 2
    tol: float = DEFAULT_TOL
    _zeta: dict = field(default_factory=dict, repr=False)
    _xi: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        _check_b(self.b)
        _check_tol(self.tol)

    def zeta_interval(self, h: int) -> Interval:
        if h not in self._zeta:
            self._zeta[h] = zeta_interval(h, self.b, self.tol)
        return self._zeta[h]

    def xi_interval(self, k: int) -> Interval:
        if k not in self._xi:
            self._xi[k] = xi_inf_interval(k, self.b, self.tol)
        return self._xi[k]

    def zeta(self, h: int) -> float:
        return self.zeta_interval(h).mid

    def xi_inf(self, k: int) -> float:
        return self.xi_interval(k).mid

    def xi_fin(self, k: int, n: int) -> float:
        return xi_fin(k, n, self.b, self.tol)

    def xi_hat(self, k: int, n: int) -> float:
        return xi_hat(k, n, self.b)

    def sigma(self, k) -> float:
        if k == CRIT:
            return sigma_crit(self.b)
        return math.log(self.b) / self.xi_inf(int(k))

    def table(self, max_k: int) -> list[tuple[str, int | str, int, float, float, float]]:
        """Rows (name, k_or_h, b, value, lo, hi) for h, k = 0..max_k."""
        rows = []
        for h in range(1, max_k + 1):
            iv = self.zeta_interval(h)
            rows.append(("zeta", h, self.b, iv.mid, iv.lo, iv.hi))
        for k in range(0, max_k + 1):
            iv = self.xi_interval(k)
            rows.append(("xi_inf", k, self.b, iv.mid, iv.lo, iv.hi))
        for k in range(0, max_k + 1):
            iv = self.xi_interval(k)
            s = math.log(self.b)
            rows.append(("sigma", k, self.b, s / iv.mid, s / iv.hi, s / iv.lo))
        sc = sigma_crit(self.b)
        rows.append(("sigma", CRIT, self.b, sc, sc, sc))
        return rows
