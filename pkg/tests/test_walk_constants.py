import math
from fractions import Fraction

import numpy as np
import pytest

from canopy_perc.walk_constants import (
    CRIT,
    WalkConstants,
    degree_series,
    double_edge_probability,
    sigma_crit,
    sigma_thresholds,
    twothirds_bounds,
    xi_fin,
    xi_fin_interval,
    xi_hat,
    xi_inf,
    xi_inf_interval,
    zeta,
    zeta_bounds,
    zeta_interval,
)


def zeta_oracle(k, b, terms=80):
    """Plain partial sum of the endpoint series, well past double precision."""
    return float(sum(Fraction((b - 1) ** 2, (b ** (h + 1) - 1) * (b**h - 1)) for h in range(k, k + terms)))


def xi_oracle(k, b, terms=80):
    """Double series (b-1) b^k sum_{h>k} b^(h-1) zeta_h, summed directly."""
    total = Fraction(0)
    z = {h: Fraction(0) for h in range(k + 1, k + terms + 1)}
    for h in z:
        z[h] = sum(Fraction((b - 1) ** 2, (b ** (j + 1) - 1) * (b**j - 1)) for j in range(h, k + terms + 40))
        total += b ** (h - 1) * z[h]
    return float((b - 1) * b**k * total)


@pytest.mark.parametrize("b", [2, 3, 4])
@pytest.mark.parametrize("k", [1, 2, 5])
def test_zeta_matches_direct_sum(k, b):
    assert zeta(k, b) == pytest.approx(zeta_oracle(k, b), rel=1e-12)


def test_zeta_examples():
    assert zeta(1) == pytest.approx(0.393305, abs=1e-6)
    assert zeta(1) < 0.5
    assert zeta(2) == pytest.approx(zeta(1) - 1 / 3, rel=1e-11)


def test_zeta_interval_width():
    iv = zeta_interval(3, 2, tol=1e-12)
    assert iv.hi - iv.lo <= 1e-12 * iv.lo


@pytest.mark.parametrize("b", [2, 3, 4])
def test_zeta_decay_and_bounds(b):
    for i in range(1, 21):
        assert zeta(i + 1, b) < zeta(i, b) / b**2
    for h in range(1, 16):
        lo, hi = zeta_bounds(h, b)
        assert lo < zeta(h, b) < hi


def test_zeta_bounds_example():
    lo, hi = zeta_bounds(1, 2)
    assert lo == pytest.approx(0.25)
    assert hi == pytest.approx(4 / 9)
    lo20, hi20 = zeta_bounds(20, 2)
    assert hi20 / lo20 == pytest.approx(1, abs=1e-5)


@pytest.mark.parametrize("b", [2, 3])
def test_xi_inf_decreasing_and_bracketed(b):
    vals = [xi_inf(k, b) for k in range(13)]
    assert all(p > q for p, q in zip(vals, vals[1:]))
    for k, v in enumerate(vals):
        lo, hi = twothirds_bounds(k, b)
        assert lo < v < hi


@pytest.mark.parametrize("k,b", [(0, 2), (2, 2), (1, 3)])
def test_xi_inf_matches_double_series(k, b):
    assert xi_inf(k, b) == pytest.approx(xi_oracle(k, b, terms=60), rel=1e-10)


def test_xi_inf_examples():
    assert 4 / 9 < xi_inf(0) < 8 / 9
    assert xi_inf(0) == pytest.approx(0.6067, abs=1e-4)
    assert xi_inf(40) == pytest.approx(1 / 3, abs=1e-11)


def test_xi_fin_bracket_and_limit():
    for k in range(4):
        for n in range(k + 1, k + 12):
            v = xi_fin(k, n)
            assert xi_inf(k) - 2.0 ** (2 * k - 2 * n) < v < xi_inf(k)
        vals = [xi_fin(k, n) for n in range(k + 1, k + 20)]
        assert all(p < q for p, q in zip(vals, vals[1:]))
    assert xi_fin(0, 40) == pytest.approx(xi_inf(0), abs=1e-15)


def test_xi_fin_lower_display():
    b, k = 2, 2
    for n in range(6, 16):
        if 2 * n >= 3 * k + 5:
            assert xi_fin(k, n, b) > (b - 1) / (b + 1) + 0.25 * b ** (-k - 1)


def test_xi_fin_invalid():
    with pytest.raises(ValueError):
        xi_fin(3, 3)
    with pytest.raises(ValueError):
        xi_fin_interval(4, 2)


def xi_fin_walk_oracle(k, n, b):
    """xi_k^(n) from the finite-tree endpoint law: b**k (b-1) sum_h b**(h-1) P_n(lca height h)."""
    from canopy_perc.particle_model import endpoint_probability

    return b**k * (b - 1) * sum(b ** (h - 1) * endpoint_probability(h, n, b) for h in range(k + 1, n + 1))


@pytest.mark.parametrize("k,n,b", [(0, 3, 2), (1, 5, 2), (0, 4, 3), (2, 7, 2)])
def test_xi_fin_matches_finite_walk_law(k, n, b):
    assert xi_fin(k, n, b) == pytest.approx(xi_fin_walk_oracle(k, n, b), rel=1e-10)


@pytest.mark.parametrize("k,n,b,expected", [(0, 1, 2, 0.5), (4, 5, 3, 2 / 3), (0, 10, 2, 1 - 2.0**-10)])
def test_xi_hat(k, n, b, expected):
    assert xi_hat(k, n, b) == pytest.approx(expected, rel=1e-15)


def test_sigma_values():
    assert sigma_crit(2) == pytest.approx(3 * math.log(2))
    assert sigma_thresholds(CRIT, 2) == sigma_crit(2)
    assert sigma_thresholds(0, 2) == pytest.approx(math.log(2) / xi_inf(0))
    assert sigma_thresholds(0, 2) == pytest.approx(1.142, abs=1e-3)
    sig = [sigma_thresholds(k) for k in range(12)]
    assert all(p < q for p, q in zip(sig, sig[1:]))
    assert sig[-1] < sigma_crit(2)


def test_degree_series_examples():
    assert degree_series(0.0) == 0.0
    assert degree_series(1.0) == pytest.approx(0.876, abs=5e-4)
    brute = sum((2 - 1) * 2 ** (h - 1) * -math.expm1(-1.0 * 2.0 ** (1 - 2 * h)) for h in range(1, 200))
    assert degree_series(1.0) == pytest.approx(brute, rel=1e-12)
    r2 = degree_series(1e2) / 10
    r4 = degree_series(1e4) / 100
    assert 0.5 < r2 / r4 < 2
    with pytest.raises(ValueError):
        degree_series(-1.0)


def test_double_edge_probability():
    assert double_edge_probability(2) == pytest.approx(2 / 7)
    direct = sum(2 ** (h - 1) * 4.0 ** (1 - 2 * h) for h in range(1, 60))
    assert double_edge_probability(2) == pytest.approx(direct)


def test_walk_constants_table():
    wc = WalkConstants(2)
    rows = wc.table(3)
    names = {r[0] for r in rows}
    assert {"zeta", "xi_inf"} <= names
    for name, k, b, value, lo, hi in rows:
        assert lo <= value <= hi
        assert hi - lo <= wc.tol * abs(lo) + 1e-300 or name.startswith("sigma")
    assert wc.sigma(CRIT) == sigma_crit(2)
    with pytest.raises(ValueError):
        WalkConstants(1)
    with pytest.raises(ValueError):
        zeta(0)
