import pytest

from flexmatch.core import (
    MICRO,
    ContractViolation,
    LoadSpec,
    MarketParams,
    MatchRecord,
    Realization,
    Source,
    WelfareBreakdown,
    format_money,
    make_record,
    record_welfare,
    to_micro,
    validate_realization,
    willingness_to_pay,
)

C = 13 * MICRO


@pytest.mark.parametrize(
    "a, b, d, t, expected",
    [
        (1, 1.0, 5, 4, 10),
        (3, 7.0, 3, 3, 13),
        (1, 0.5, 9, 9, 9),
    ],
)
def test_willingness_to_pay(a, b, d, t, expected):
    load = LoadSpec(1, a=a, d=d, b=to_micro(b))
    assert willingness_to_pay(load, t, C) == expected * MICRO


@pytest.mark.parametrize("t", [0, 6])
def test_willingness_to_pay_outside_window(t):
    load = LoadSpec(42, a=1, d=5, b=MICRO)
    with pytest.raises(ContractViolation, match="load 42"):
        willingness_to_pay(load, t, C)


def test_record_welfare():
    load = LoadSpec(1, a=1, d=3, b=MICRO)
    assert record_welfare(make_record(load, 1, Source.RES, C)) == 13 * MICRO
    assert record_welfare(make_record(load, 1, Source.GS, C)) == 0
    assert record_welfare(make_record(load, 3, Source.GS, C)) == -2 * MICRO


def test_breakdown_totals():
    recs = [
        MatchRecord(1, 1, Source.RES, 13 * MICRO, 0),
        MatchRecord(2, 2, Source.GS, 12 * MICRO, C),
    ]
    wb = WelfareBreakdown.from_records(recs)
    assert (wb.total, wb.w_rs, wb.w_gs, wb.grid_payment) == (12 * MICRO, 13 * MICRO, -MICRO, -C)


def _single(load, T=5):
    params = MarketParams(C, T)
    steps = [() for _ in range(T)]
    steps[load.a - 1] = (load,)
    return Realization(params, tuple(steps), (0,) * T)


def test_validate_flags_inverted_window():
    problems = validate_realization(_single(LoadSpec(7, a=3, d=2, b=0)))
    assert len(problems) == 1
    assert "load 7" in problems[0]


def test_validate_empty_is_ok():
    params = MarketParams(C, 4)
    assert validate_realization(Realization(params, ((),) * 4, (0,) * 4)) == []


def test_validate_requires_strictly_positive_wtp():
    # c - b (d - a) == 0 exactly
    problems = validate_realization(_single(LoadSpec(3, a=1, d=3, b=to_micro(6.5))))
    assert len(problems) == 1 and "positive" in problems[0]


def test_validate_reports_every_violation():
    params = MarketParams(C, 3)
    steps = ((LoadSpec(1, 1, 0, 0), LoadSpec(1, 1, 2, -1)), (), ())
    r = Realization(params, steps, (0, 9, 0), supply_bound=8)
    problems = validate_realization(r)
    assert len(problems) == 4


def test_money_formatting_is_exact():
    assert to_micro("0.1") == 100_000
    assert format_money(-1_500_000) == "-1.500000"
    assert format_money(12) == "0.000012"


def test_market_params_invariants():
    with pytest.raises(ContractViolation):
        MarketParams(c=0, T=3)
    with pytest.raises(ContractViolation):
        MarketParams(c=1, T=0)
