"""Per-realization audits used by the fuzz tests and the ``simulate`` command."""

from __future__ import annotations

from collections import Counter

from .core import Realization, Source, WelfareBreakdown
from .online import OnlineEngine, PolicyId, order_active
from .scenarios import MomentSummary


def feasibility_violations(r: Realization, wb: WelfareBreakdown) -> list[str]:
    """Every load served exactly once, inside its window, within supply."""
    out = []
    loads = {l.id: l for l in r.loads()}
    counts = Counter(rec.load_id for rec in wb.records)
    for load_id in loads:
        if counts[load_id] != 1:
            out.append(f"load {load_id} served {counts[load_id]} times")
    for load_id in counts.keys() - loads.keys():
        out.append(f"record for unknown load {load_id}")
    used = Counter(rec.t for rec in wb.records if rec.source is Source.RES)
    for rec in wb.records:
        load = loads.get(rec.load_id)
        if load is not None and not load.active_at(rec.t):
            out.append(f"load {rec.load_id} served at t={rec.t} outside [{load.a}, {load.d}]")
    for t, n in used.items():
        if not 1 <= t <= r.params.T or n > r.supply_at(t):
            out.append(f"t={t}: {n} renewable matches exceed supply")
    if wb.total != wb.w_rs + wb.w_gs or wb.total != sum(rec.welfare for rec in wb.records):
        out.append("welfare totals do not add up")
    return out


def audit_online(policy: PolicyId | str, r: Realization, moments: MomentSummary | None) -> tuple[WelfareBreakdown, list[str]]:
    """Run ``policy`` step by step, checking each step's decisions as they are made."""
    engine = OnlineEngine(policy, r, moments)
    out = []
    prefix_policy = engine.policy in (
        PolicyId.M1,
        PolicyId.M1_NO_STEP3,
        PolicyId.M2,
        PolicyId.M2_NO_STEP3,
    )
    while not engine.done:
        engine.admit()
        t = engine.state.t
        active_ids = [l.id for l in engine.state.active]
        ordered = [l.id for l in order_active(engine.state.active)]
        dec = engine.decide()
        matched = list(dec.res_matches) + list(dec.gs_matches)
        if dec.s_used > r.supply_at(t):
            out.append(f"t={t}: {dec.s_used} renewable matches with supply {r.supply_at(t)}")
        if len(set(matched)) != len(matched):
            out.append(f"t={t}: a load was matched twice")
        if not set(matched) <= set(active_ids):
            out.append(f"t={t}: matched a load that is not active")
        if dec.s_used + dec.p_used != len(matched):
            out.append(f"t={t}: supply balance bookkeeping broken")
        if prefix_policy and list(dec.res_matches) != ordered[: dec.s_used]:
            out.append(f"t={t}: renewable matches are not a prefix of the criticality order")
        engine.apply(dec)
        if any(l.d <= t for l in engine.state.active):
            out.append(f"t={t}: a load reached its deadline unserved")
    wb = WelfareBreakdown.from_records(engine.state.ledger)
    out.extend(feasibility_violations(r, wb))
    return wb, out
