import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flexmatch.core import MICRO, LoadSpec, MarketParams, Source, realization_from_loads, willingness_to_pay
from flexmatch.harness import tiny_instance
from flexmatch.oracle import AssignmentProblem, InstanceTooLarge, brute_force_oracle, oracle_solve
from flexmatch.scenarios import DiscretePmf, LoadAssignerSpec, ScenarioConfig, sample_realization

C = 13 * MICRO


def enumerate_best(r):
    """Try every assignment of loads to individual renewable units or the grid."""
    loads = list(r.loads())
    units = [t for t in range(1, r.params.T + 1) for _ in range(r.supply_at(t))]
    best = 0
    for choice in itertools.product(range(-1, len(units)), repeat=len(loads)):
        taken = [u for u in choice if u >= 0]
        if len(taken) != len(set(taken)):
            continue
        value = 0
        for load, u in zip(loads, choice):
            if u < 0:
                continue
            if not load.active_at(units[u]):
                break
            value += willingness_to_pay(load, units[u], r.params.c)
        else:
            best = max(best, value)
    return best


def _r(loads, supply):
    return realization_from_loads(MarketParams(C, len(supply)), loads, supply)


def test_two_step_instance(two_step):
    assert enumerate_best(two_step) == 13 * MICRO
    assert oracle_solve(two_step).total == 13 * MICRO
    assert brute_force_oracle(two_step).total == 13 * MICRO


def test_no_supply_gives_zero():
    r = _r([LoadSpec(1, 1, 2, MICRO), LoadSpec(2, 2, 3, 0)], [0, 0, 0])
    wb = oracle_solve(r)
    assert wb.total == 0
    assert all(rec.source is Source.GS and rec.t == 1 + (rec.load_id == 2) for rec in wb.records)


def test_abundant_supply():
    loads = [LoadSpec(i, a=1 + i % 3, d=3, b=MICRO) for i in range(1, 8)]
    r = _r(loads, [8, 8, 8])
    assert oracle_solve(r).total == C * 7


def test_single_load_single_slot():
    r = _r([LoadSpec(1, 1, 2, MICRO)], [0, 1])
    assert oracle_solve(r).total == brute_force_oracle(r).total == 12 * MICRO


def test_no_loads():
    r = _r([], [3, 1])
    assert oracle_solve(r).total == brute_force_oracle(r).total == 0


def test_brute_force_refuses_large_instances():
    r = _r([LoadSpec(i, 1, 1, 0) for i in range(1, 10)], [1])
    with pytest.raises(InstanceTooLarge):
        brute_force_oracle(r)
    r = _r([LoadSpec(1, 1, 1, 0)], [13])
    with pytest.raises(InstanceTooLarge):
        brute_force_oracle(r)


def test_inadmissible_pairs_are_absent():
    r = _r([LoadSpec(1, 1, 1, MICRO), LoadSpec(2, 2, 2, MICRO)], [1, 1])
    problem = AssignmentProblem.from_realization(r)
    assert problem.weight(problem.loads[0], (2, 0)) is None
    assert {(i, j) for i, j, _ in problem.edges()} == {(0, 0), (1, 1)}


def test_brute_force_matches_exhaustive_enumeration():
    params = MarketParams(C, 3)
    for i in range(60):
        r = tiny_instance(77, i, params, max_loads=4, max_units=5)
        assert brute_force_oracle(r).total == enumerate_best(r)


def test_oracle_agrees_with_brute_force_on_random_instances():
    params = MarketParams(C, 4)
    for i in range(250):
        r = tiny_instance(2024, i, params)
        fast, slow = oracle_solve(r), brute_force_oracle(r)
        assert fast.total == slow.total, i


@st.composite
def tiny_realizations(draw):
    T = draw(st.integers(1, 4))
    n = draw(st.integers(0, 8))
    loads = []
    for i in range(n):
        a = draw(st.integers(1, T))
        d = draw(st.integers(a, T))
        cap = (C - 1) // (d - a) if d > a else C
        b = draw(st.integers(0, min(cap, 5 * MICRO)))
        loads.append(LoadSpec(i + 1, a, d, b))
    supply = draw(st.lists(st.integers(0, 4), min_size=T, max_size=T).filter(lambda s: sum(s) <= 12))
    return realization_from_loads(MarketParams(C, T), loads, supply)


@settings(max_examples=200, deadline=None)
@given(tiny_realizations())
def test_oracle_equivalence_property(r):
    fast = oracle_solve(r)
    assert fast.total == brute_force_oracle(r).total
    assert all(rec.welfare >= 0 for rec in fast.records if rec.source is Source.GS)
    assert sorted(rec.load_id for rec in fast.records) == sorted(l.id for l in r.loads())


def test_expected_oracle_welfare_lower_bound():
    cfg = ScenarioConfig(
        MarketParams(C, 10),
        DiscretePmf.uniform(1, 7),
        DiscretePmf((0, 3, 6), (0.25, 0.5, 0.25)),
        load_assigner=LoadAssignerSpec(deadline_window=(0, 4), criticality_range=(0, 3 * MICRO)),
        seed=31,
    )
    w = np.array([oracle_solve(sample_realization(cfg, i)).total for i in range(600)], dtype=float)
    bound = C * 10 * cfg.moments().n_sm
    assert w.mean() >= bound - 3 * w.std(ddof=1) / math.sqrt(len(w))
