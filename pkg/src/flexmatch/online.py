"""Online matching policies and the step engine that drives them.

Each policy looks only at the loads active at the current step, the
renewable units available now, and (for M2) the static moments of the
arrival and supply processes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .core import (
    LoadSpec,
    MatchRecord,
    Realization,
    Source,
    WelfareBreakdown,
    make_record,
    willingness_to_pay,
)
from .scenarios import ConfigError, MomentSummary


class PolicyId(str, enum.Enum):
    M1 = "m1"
    M1_NO_STEP3 = "m1-ns3"
    M2 = "m2"
    M2_NO_STEP3 = "m2-ns3"
    EDF = "edf"
    MH = "mh"

    @classmethod
    def parse(cls, name: str | PolicyId) -> PolicyId:
        if isinstance(name, PolicyId):
            return name
        key = name.strip()
        try:
            return cls(key.lower().replace("_", "-"))
        except ValueError:
            pass
        try:
            return cls[key.upper().replace("-", "_")]
        except KeyError:
            raise ConfigError(
                f"unknown policy {name!r}; choose from {', '.join(p.value for p in cls)}"
            ) from None

    @property
    def uses_m2_quota(self) -> bool:
        return self in (PolicyId.M2, PolicyId.M2_NO_STEP3)

    @property
    def applies_step3(self) -> bool:
        return self in (PolicyId.M1, PolicyId.M2)


@dataclass
class EngineState:
    t: int
    c: int
    active: list[LoadSpec] = field(default_factory=list)
    m2_carry: float = 0.0
    ledger: list[MatchRecord] = field(default_factory=list)

    def fresh(self) -> list[LoadSpec]:
        return [l for l in self.active if l.a == self.t]


@dataclass(frozen=True)
class StepDecisions:
    res_matches: tuple[int, ...]
    gs_matches: tuple[int, ...]
    m2_carry: float = 0.0

    @property
    def s_used(self) -> int:
        return len(self.res_matches)

    @property
    def p_used(self) -> int:
        return len(self.gs_matches)


def criticality_key(load: LoadSpec) -> tuple[int, int, int, int]:
    return (-load.b, load.d, load.a, load.id)


def order_active(active: Iterable[LoadSpec], t: int | None = None, c: int | None = None) -> list[LoadSpec]:
    """Most critical first; ties by earlier deadline, then arrival, then id.

    ``t`` and ``c`` are accepted for signature symmetry with the other
    orderings but do not affect the result.
    """
    return sorted(active, key=criticality_key)


def edf_order(active: Iterable[LoadSpec]) -> list[LoadSpec]:
    return sorted(active, key=lambda l: (l.d, -l.b, l.id))


def mh_order(active: Iterable[LoadSpec], t: int, c: int) -> list[LoadSpec]:
    return sorted(active, key=lambda l: (-willingness_to_pay(l, t, c), l.d, l.id))


def _greedy_res(ordered: Sequence[LoadSpec], supply: int) -> tuple[list[LoadSpec], list[LoadSpec]]:
    k = min(max(supply, 0), len(ordered))
    return list(ordered[:k]), list(ordered[k:])


def _step3(state: EngineState, res: list[LoadSpec], rest: list[LoadSpec]) -> tuple[list[LoadSpec], list[LoadSpec]]:
    """Send to GS every leftover load valued strictly above some RES-matched load."""
    if not res:
        return [], rest
    floor = min(willingness_to_pay(l, state.t, state.c) for l in res)
    to_gs = [l for l in rest if willingness_to_pay(l, state.t, state.c) > floor]
    keep = [l for l in rest if willingness_to_pay(l, state.t, state.c) <= floor]
    return to_gs, keep


def _deadline(state: EngineState, rest: Iterable[LoadSpec]) -> list[LoadSpec]:
    return [l for l in rest if l.d == state.t]


def _ids(loads: Iterable[LoadSpec]) -> tuple[int, ...]:
    return tuple(l.id for l in loads)


def m1_step(state: EngineState, supply: int, apply_step3: bool = False) -> StepDecisions:
    ordered = order_active(state.active)
    res, rest = _greedy_res(ordered, supply)
    gs: list[LoadSpec] = []
    if apply_step3:
        gs, rest = _step3(state, res, rest)
    gs += _deadline(state, rest)
    return StepDecisions(_ids(res), _ids(gs), state.m2_carry)


def m2_quota_gap(moments: MomentSummary) -> float:
    gap = moments.mu_n - moments.mu_s
    if gap < 0:
        raise ConfigError(
            f"M2 needs mean arrivals >= mean supply, got {moments.mu_n:g} < {moments.mu_s:g}; use M1"
        )
    return gap


def m2_step(
    state: EngineState,
    supply: int,
    moments: MomentSummary,
    apply_step3: bool = False,
) -> StepDecisions:
    """M1 steps, plus an on-arrival GS commitment of ``mu_n - mu_s`` loads per step.

    A fractional gap is spread over steps with a carry accumulator. Quota
    that goes unused because too few loads arrived lapses, apart from the
    fractional remainder, so the carry stays below one between steps.
    """
    gap = m2_quota_gap(moments)
    ordered = order_active(state.active)
    res, rest = _greedy_res(ordered, supply)
    gs: list[LoadSpec] = []
    if apply_step3:
        gs, rest = _step3(state, res, rest)

    carry = state.m2_carry + gap
    quota = math.floor(carry + 1e-9)
    fresh = [l for l in rest if l.a == state.t][:quota]
    carry -= len(fresh)
    if carry >= 1.0 - 1e-9:
        carry -= math.floor(carry + 1e-9)
    carry = max(carry, 0.0)
    taken = {l.id for l in fresh}
    rest = [l for l in rest if l.id not in taken]
    gs += fresh
    gs += _deadline(state, rest)
    return StepDecisions(_ids(res), _ids(gs), carry)


def _baseline_step(state: EngineState, supply: int, ordered: list[LoadSpec]) -> StepDecisions:
    res, rest = _greedy_res(ordered, supply)
    return StepDecisions(_ids(res), _ids(_deadline(state, rest)), state.m2_carry)


def edf_step(state: EngineState, supply: int) -> StepDecisions:
    return _baseline_step(state, supply, edf_order(state.active))


def mh_step(state: EngineState, supply: int) -> StepDecisions:
    return _baseline_step(state, supply, mh_order(state.active, state.t, state.c))


StepFn = Callable[[EngineState, int], StepDecisions]


def step_function(policy: PolicyId | str, moments: MomentSummary | None = None) -> StepFn:
    policy = PolicyId.parse(policy)
    if policy.uses_m2_quota:
        if moments is None:
            raise ConfigError("M2 needs the arrival/supply moments")
        m2_quota_gap(moments)
        step3 = policy.applies_step3
        return lambda state, s: m2_step(state, s, moments, step3)
    if policy in (PolicyId.M1, PolicyId.M1_NO_STEP3):
        step3 = policy.applies_step3
        return lambda state, s: m1_step(state, s, step3)
    if policy is PolicyId.EDF:
        return edf_step
    return mh_step


class OnlineEngine:
    """Steps one policy through one realization.

    Call :meth:`step` once per market step; it admits that step's arrivals,
    asks the policy for decisions, records them, and drops matched loads.
    """

    def __init__(self, policy: PolicyId | str, realization: Realization, moments: MomentSummary | None = None):
        self.policy = PolicyId.parse(policy)
        self.realization = realization
        self._step_fn = step_function(self.policy, moments)
        self.state = EngineState(t=0, c=realization.params.c)

    @property
    def done(self) -> bool:
        return self.state.t >= self.realization.params.T

    def admit(self) -> None:
        """Advance to the next step and add its arrivals to the active set."""
        self.state.t += 1
        self.state.active.extend(self.realization.arrivals_at(self.state.t))

    def decide(self) -> StepDecisions:
        return self._step_fn(self.state, self.realization.supply_at(self.state.t))

    def apply(self, decisions: StepDecisions) -> None:
        st = self.state
        by_id = {l.id: l for l in st.active}
        for load_id in decisions.res_matches:
            st.ledger.append(make_record(by_id[load_id], st.t, Source.RES, st.c))
        for load_id in decisions.gs_matches:
            st.ledger.append(make_record(by_id[load_id], st.t, Source.GS, st.c))
        matched = set(decisions.res_matches) | set(decisions.gs_matches)
        st.active = [l for l in st.active if l.id not in matched]
        st.m2_carry = decisions.m2_carry

    def step(self) -> StepDecisions:
        self.admit()
        decisions = self.decide()
        self.apply(decisions)
        return decisions

    def run(self) -> WelfareBreakdown:
        while not self.done:
            self.step()
        return WelfareBreakdown.from_records(self.state.ledger)


def run_online(
    policy: PolicyId | str,
    r: Realization,
    moments: MomentSummary | None = None,
) -> WelfareBreakdown:
    return OnlineEngine(policy, r, moments).run()
