import os

import numpy as np
import pytest

# certificate calls cross-check against union-find in tests
os.environ.setdefault("CANOPY_TEST_MODE", "1")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def chi2_pvalue(observed, expected_probs, min_expected=5.0):
    """Goodness-of-fit p-value after pooling sparse cells into their neighbours."""
    from scipy import stats

    observed = np.asarray(observed, dtype=float)
    total = observed.sum()
    exp = np.asarray(expected_probs, dtype=float) * total
    obs_b, exp_b = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs_b.append(acc_o)
            exp_b.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 and exp_b:
        obs_b[-1] += acc_o
        exp_b[-1] += acc_e
    exp_b = np.asarray(exp_b)
    exp_b *= np.sum(obs_b) / exp_b.sum()
    return stats.chisquare(obs_b, exp_b).pvalue


_ACCEPTANCE: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion; echoed in the terminal summary."""

    def _report(number: int, ok: bool, detail: str) -> bool:
        line = f"AC{number} {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        _ACCEPTANCE.append(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
