import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flexmatch.core import MICRO, MarketParams, validate_realization
from flexmatch.scenarios import (
    AssignerMode,
    ConfigError,
    DiscretePmf,
    LoadAssignerSpec,
    ScenarioConfig,
    moments,
    sample_realization,
    scale_variance,
)

C = 13 * MICRO
U3 = DiscretePmf.uniform(1, 3)


def exact_expected_min(n_support, s_support):
    """E[min(n, s)] for independent uniforms, by enumeration in exact arithmetic."""
    pairs = list(itertools.product(n_support, s_support))
    return sum(Fraction(min(x, y)) for x, y in pairs) / len(pairs)


def test_uniform_moments():
    m = moments(U3, DiscretePmf.point(4))
    assert m.mu_n == pytest.approx(2.0, abs=1e-15)
    assert m.sigma_n == pytest.approx(math.sqrt(2 / 3), abs=1e-15)
    assert (m.mu_s, m.sigma_s) == (4.0, 0.0)
    assert m.sigma_combined == pytest.approx(math.sqrt(2 / 3), abs=1e-15)


def test_expected_min():
    expected = exact_expected_min([1, 2, 3], [1, 2, 3])
    assert expected == Fraction(14, 9)
    assert moments(U3, U3).n_sm == pytest.approx(14 / 9, abs=1e-14)


def test_expected_min_asymmetric():
    n, s = DiscretePmf.uniform(0, 4), DiscretePmf.uniform(2, 7)
    expected = exact_expected_min(range(0, 5), range(2, 8))
    assert moments(n, s).n_sm == pytest.approx(float(expected), abs=1e-14)


def test_invalid_pmf():
    with pytest.raises(ConfigError, match="sum"):
        DiscretePmf((0, 1), (0.5, 0.4))
    with pytest.raises(ConfigError, match="distinct"):
        DiscretePmf((1, 1), (0.5, 0.5))


def test_scale_variance_identity_and_collapse():
    assert scale_variance(U3, 1.0) == U3
    collapsed = scale_variance(U3, 0.0)
    assert collapsed.support == (2,) and collapsed.probs == (1.0,)


def test_scale_variance_quarter():
    lam = Fraction(1, 4)
    base = {1: Fraction(1, 3), 2: Fraction(1, 3), 3: Fraction(1, 3)}
    mixed = {x: lam * p + (1 - lam) * (x == 2) for x, p in base.items()}
    assert mixed == {1: Fraction(1, 12), 2: Fraction(10, 12), 3: Fraction(1, 12)}
    var = sum(p * (x - 2) ** 2 for x, p in mixed.items())
    assert var == lam * Fraction(2, 3)

    got = scale_variance(U3, 0.25)
    assert got.support == (1, 2, 3)
    assert got.probs == pytest.approx([1 / 12, 10 / 12, 1 / 12], abs=1e-15)
    assert got.variance == pytest.approx(float(var), abs=1e-15)


def test_scale_variance_off_support_mean():
    pmf = DiscretePmf.uniform(1, 4)  # mean 2.5, nearest support value 2
    lam = 0.3
    got = scale_variance(pmf, lam)
    expected = lam * pmf.variance + lam * (1 - lam) * (2.5 - 2) ** 2
    assert got.variance == pytest.approx(expected, abs=1e-14)
    assert got.mean == pytest.approx(lam * 2.5 + (1 - lam) * 2, abs=1e-14)


@pytest.mark.parametrize("lam", [-0.1, 1.5])
def test_scale_variance_rejects_out_of_range(lam):
    with pytest.raises(ConfigError):
        scale_variance(U3, lam)


@given(
    st.lists(st.integers(0, 10), min_size=1, max_size=6, unique=True),
    st.lists(st.floats(0.01, 1.0), min_size=6, max_size=6),
)
def test_variance_monotone_in_lambda(support, weights):
    w = weights[: len(support)]
    total = math.fsum(w)
    pmf = DiscretePmf(tuple(support), tuple(x / total for x in w))
    grid = np.linspace(0, 1, 11)
    variances = [scale_variance(pmf, float(lam)).variance for lam in grid]
    assert variances[0] == pytest.approx(0.0, abs=1e-12)
    assert all(b >= a - 1e-12 for a, b in zip(variances, variances[1:]))


def make_config(mode="uniform_random", n=None, s=None, lam=1.0, seed=5, T=10, **kw):
    assigner = LoadAssignerSpec(
        mode=mode,
        deadline_window=kw.pop("deadline_window", (0, 4)),
        criticality_range=kw.pop("criticality_range", (0, 3 * MICRO)),
        table=kw.pop("table", ()),
    )
    return ScenarioConfig(
        MarketParams(C, T),
        n or DiscretePmf.uniform(1, 5),
        s or DiscretePmf.uniform(0, 8),
        lam,
        assigner,
        seed,
        **kw,
    )


def test_point_mass_realization_is_deterministic():
    cfg = make_config(n=DiscretePmf.uniform(1, 3), s=DiscretePmf((3, 4, 5), (0.2, 0.6, 0.2)), lam=0.0)
    r = sample_realization(cfg, trial=3)
    assert [len(step) for step in r.arrivals] == [2] * 10
    assert r.supply == (4,) * 10


def test_sampling_is_reproducible():
    cfg = make_config()
    assert sample_realization(cfg, 17) == sample_realization(cfg, 17)
    assert sample_realization(cfg, 17) != sample_realization(cfg, 18)


def test_arrival_count_law_of_large_numbers():
    cfg = make_config(n=DiscretePmf.uniform(1, 8), seed=99)
    counts = np.array([[len(s) for s in sample_realization(cfg, i).arrivals] for i in range(3000)], dtype=float)
    se = math.sqrt(DiscretePmf.uniform(1, 8).variance / counts.size)
    assert abs(counts.mean() - 4.5) < 3 * se


def test_supply_stream_independent_of_arrivals():
    a = make_config(n=DiscretePmf.uniform(1, 5))
    b = make_config(n=DiscretePmf.uniform(2, 9), mode="later_higher_criticality")
    for i in range(50):
        assert sample_realization(a, i).supply == sample_realization(b, i).supply


@pytest.mark.parametrize("mode", list(AssignerMode))
def test_generated_loads_are_valid(mode):
    table = ((0, MICRO), (3, 5 * MICRO), (9, 2 * MICRO))
    cfg = make_config(mode=mode, table=table, deadline_window=(0, 6), criticality_range=(0, 6 * MICRO))
    for i in range(200):
        r = sample_realization(cfg, i)
        assert validate_realization(r) == []


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**63), st.integers(0, 10_000))
def test_later_arrivals_are_more_critical(seed, trial):
    cfg = make_config(mode="later_higher_criticality", seed=seed, deadline_window=(1, 5))
    r = sample_realization(cfg, trial)
    loads = list(r.loads())
    for x in loads:
        for y in loads:
            if x.a > y.a:
                assert x.b >= y.b


def test_fixed_table_cycles():
    table = ((1, MICRO), (2, 2 * MICRO))
    cfg = make_config(mode="fixed_table", n=DiscretePmf.point(3), table=table, T=4)
    loads = list(sample_realization(cfg).loads())
    assert [l.b for l in loads] == [MICRO, 2 * MICRO] * 6
    assert [l.d - l.a for l in loads[:3]] == [1, 2, 1]
    assert loads[-1].d == 4  # clamped to the horizon


def test_bounds_respected():
    cfg = make_config(n=DiscretePmf.uniform(0, 6), s=DiscretePmf.uniform(0, 8), n_bar=6, s_bar=8)
    for i in range(200):
        r = sample_realization(cfg, i)
        assert max(len(s) for s in r.arrivals) <= 6
        assert max(r.supply) <= 8


def test_config_rejects_support_above_bound():
    with pytest.raises(ConfigError, match="bound"):
        make_config(s=DiscretePmf.uniform(0, 9), s_bar=8)
