import csv
import math

import mpmath as mp
import numpy as np
import pytest
from scipy import stats

from sparse_deloc.degree_tails import (
    EPS_MAX,
    TAIL_COLUMNS,
    TailBoundInput,
    b_star,
    empirical_extremes,
    lower_tail_bound,
    poisson_lower_tail_exact,
    stirling_chain_bound,
    upper_tail_bound,
    wilson_interval,
    write_tail_csv,
)

mp.mp.dps = 30


def mp_upper(N, b, e):
    bs = 1 / (mp.log(4) - 1)
    return 2 * mp.exp(-mp.log(N) * (b / bs - 1 - 2 * e))


def mp_lower(N, b, e):
    return 2 * mp.exp(-mp.log(N) * (b * (1 + 2 * e * mp.log(e)) - 1))


# ------------------------------------------------------------------ b*


def test_b_star():
    assert 2.588 < b_star() < 2.589
    assert abs((math.log(4) - 1) * b_star() - 1) <= 1e-15
    assert b_star() > 1
    assert b_star() == pytest.approx(float(1 / (mp.log(4) - 1)), rel=1e-15)


# ------------------------------------------------------------------ closed-form bounds


def test_upper_bound_example():
    # exponent -(b/b* - 1 - 2 eps) log N with b/b* = 1.352045...
    got = upper_tail_bound(TailBoundInput(4000, 3.5, 0.05))
    assert got == pytest.approx(float(mp_upper(4000, 3.5, mp.mpf("0.05"))), rel=1e-13)
    assert got == pytest.approx(0.247287, abs=1e-6)


def test_upper_bound_vacuous_at_b_star():
    got = upper_tail_bound(TailBoundInput(10**6, b_star(), 1e-12))
    assert got == pytest.approx(2.0, rel=1e-9)


def test_lower_bound_examples():
    got = lower_tail_bound(TailBoundInput(10**4, 3.0, 0.1))
    assert got == pytest.approx(float(mp_lower(10**4, 3, mp.mpf("0.1"))), rel=1e-13)
    assert got == pytest.approx(0.0067179, abs=1e-7)
    assert 1 + 2 * 0.1 * math.log(0.1) == pytest.approx(0.539483, abs=1e-6)
    assert lower_tail_bound(TailBoundInput(10**4, 1.5, 0.1)) > 1


def test_lower_bound_limit_small_eps():
    N, b = 10**4, 2.0
    limit = 2 * N ** (1 - b)
    vals = [lower_tail_bound(TailBoundInput(N, b, e)) for e in (1e-3, 1e-5, 1e-8)]
    errs = [abs(v - limit) for v in vals]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] / limit < 1e-5


@pytest.mark.parametrize(
    "kw",
    [dict(N=1, b=1, epsilon=0.1), dict(N=100, b=1, epsilon=0.0), dict(N=100, b=1, epsilon=1.0),
     dict(N=100, b=5, epsilon=0.1), dict(N=100, b=-1, epsilon=0.1)],
)
def test_input_validation(kw):
    with pytest.raises(ValueError):
        TailBoundInput(**kw)


# ------------------------------------------------------------------ exact Poisson and chain


def test_poisson_exact_examples():
    assert poisson_lower_tail_exact(10, 0.2) == pytest.approx(61 * math.exp(-10), rel=1e-12)
    assert poisson_lower_tail_exact(3, 0.3) == pytest.approx(math.exp(-3), rel=1e-14)


def test_poisson_exact_vs_scipy():
    for d in (0.5, 3.0, 17.3, 80.0):
        for e in (0.05, 0.2, 0.7):
            ref = stats.poisson.cdf(math.floor(e * d), d)
            assert poisson_lower_tail_exact(d, e) == pytest.approx(ref, rel=1e-12)


def test_chain_example():
    c = stirling_chain_bound(10, 0.2, math.e)
    assert c.exact == pytest.approx(61 * math.exp(-10), rel=1e-12)
    assert c.leading_term == pytest.approx(4 / 3 * 50 * math.exp(-10), rel=1e-12)
    assert c.stirling == pytest.approx(1.5 * math.exp(-10 + 2 * (1 + math.log(5))), rel=1e-12)
    assert c.final == pytest.approx(1.5 * math.exp(-10 * (1 + 0.4 * math.log(0.2))), rel=1e-12)
    assert c.final == pytest.approx(0.0425624, abs=1e-7)
    assert c.monotone()


def test_chain_monotone_on_grid():
    ds = np.linspace(5, 60, 10)
    es = np.linspace(0.02, EPS_MAX, 5)
    for d in ds:
        for e in es:
            assert stirling_chain_bound(d, e, 1000.0).monotone(), (d, e)


def test_chain_integer_boundary():
    # eps*d = 2 exactly despite float rounding of 0.2 * 10
    c = stirling_chain_bound(10, 0.2, 100.0)
    assert c.exact == pytest.approx(stats.poisson.cdf(2, 10), rel=1e-12)
    c = stirling_chain_bound(15, 0.2, 100.0)
    assert c.exact == pytest.approx(stats.poisson.cdf(3, 15), rel=1e-12)


def test_chain_rejects_large_eps():
    with pytest.raises(ValueError):
        stirling_chain_bound(10, 0.3, 100.0)


# ------------------------------------------------------------------ Monte Carlo


def test_wilson_interval():
    lo, hi = wilson_interval(0, 1000)
    assert lo <= 1e-12
    assert hi == pytest.approx(3.8415 / (1000 + 3.8415), rel=1e-3)
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - 0.5 == pytest.approx(0.5 - lo)


def test_empty_graph_extremes():
    s = empirical_extremes(100, 0.0, 5)
    assert np.all(s.min_alpha == 0) and np.all(s.max_alpha == 0)


def test_extremes_deterministic_and_match_sampler():
    from sparse_deloc.matrix_model import ModelConfig, derive_seed, sample_er_adjacency

    a = empirical_extremes(500, 2.0, 3, seed=4)
    b = empirical_extremes(500, 2.0, 3, seed=4)
    assert np.array_equal(a.min_alpha, b.min_alpha)
    m = sample_er_adjacency(ModelConfig.from_b(500, 2.0, seed=derive_seed(4, 0xDE, 1)))
    assert a.min_alpha[1] == m.alpha.min() and a.max_alpha[1] == m.alpha.max()


def test_extremes_vs_bounds_n2000():
    s = empirical_extremes(2000, 3.5, 1000, seed=1)
    rows = s.rows([0.05, 0.1])
    for r in rows:
        assert r["ci_lo"] <= r["bound_lower"]
        assert r["ci_upper_lo"] <= r["bound_upper"]
    # at eps = 0.05 the upper bound is ~0.3 and well resolved by 1000 trials
    assert rows[0]["ci_upper_hi"] <= rows[0]["bound_upper"]


def test_extremes_validation():
    with pytest.raises(ValueError):
        empirical_extremes(100, 1.0, 0)
    with pytest.raises(ValueError):
        empirical_extremes(100, 5.0, 1)


def test_tail_csv(tmp_path):
    rows = empirical_extremes(300, 1.5, 20, seed=0).rows([0.1])
    p = tmp_path / "t.csv"
    write_tail_csv(p, rows)
    with open(p) as fh:
        rd = list(csv.reader(fh))
    assert rd[0][: len(TAIL_COLUMNS)] == TAIL_COLUMNS
    assert float(rd[1][3]) == rows[0]["bound_upper"]
