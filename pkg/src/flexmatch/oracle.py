"""Offline benchmark: the maximum-welfare assignment for a known realization.

Every renewable unit is a slot ``(t, unit)``. A load may take a slot only
inside its window ``[a, d]``, worth its willingness to pay at ``t``. A load
left without a slot is served from the grid at arrival, which is worth
exactly zero and is the best grid option since ``pi - c = -b (t - a)``.
The oracle is therefore a maximum-weight bipartite matching between loads
and slots in which loads may stay unmatched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (
    LoadSpec,
    MatchRecord,
    Realization,
    Source,
    WelfareBreakdown,
    make_record,
    willingness_to_pay,
)

BRUTE_FORCE_MAX_LOADS = 8
BRUTE_FORCE_MAX_SLOTS = 12


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class AssignmentProblem:
    loads: tuple[LoadSpec, ...]
    slots: tuple[tuple[int, int], ...]
    c: int

    @classmethod
    def from_realization(cls, r: Realization) -> AssignmentProblem:
        loads = tuple(r.loads())
        slots = []
        for t in range(1, r.params.T + 1):
            # units beyond the number of loads that could use them never matter
            usable = sum(1 for l in loads if l.active_at(t))
            slots.extend((t, u) for u in range(min(r.supply_at(t), usable)))
        return cls(loads, tuple(slots), r.params.c)

    def weight(self, load: LoadSpec, slot: tuple[int, int]) -> int | None:
        """Welfare of giving ``slot`` to ``load``; ``None`` if inadmissible."""
        t = slot[0]
        if not load.active_at(t):
            return None
        return willingness_to_pay(load, t, self.c)

    def edges(self) -> list[tuple[int, int, int]]:
        out = []
        for i, load in enumerate(self.loads):
            for j, slot in enumerate(self.slots):
                w = self.weight(load, slot)
                if w is not None:
                    out.append((i, j, w))
        return out


def _breakdown(problem: AssignmentProblem, slot_of: dict[int, int]) -> WelfareBreakdown:
    records: list[MatchRecord] = []
    for i, load in enumerate(problem.loads):
        if i in slot_of:
            t = problem.slots[slot_of[i]][0]
            records.append(make_record(load, t, Source.RES, problem.c))
        else:
            records.append(make_record(load, load.a, Source.GS, problem.c))
    return WelfareBreakdown.from_records(records)


def oracle_solve(r: Realization) -> WelfareBreakdown:
    """Exact maximum-welfare assignment for ``r``.

    Solved as a rectangular assignment problem: one row per load, one column
    per usable slot and one zero-cost grid column per load. Inadmissible
    pairs are forbidden outright (infinite cost), never priced.
    """
    problem = AssignmentProblem.from_realization(r)
    n, m = len(problem.loads), len(problem.slots)
    if n == 0:
        return WelfareBreakdown.from_records(())
    edges = problem.edges()
    if not edges:
        return _breakdown(problem, {})
    cost = np.full((n, m + n), np.inf)
    cost[:, m:] = 0.0
    for i, j, w in edges:
        cost[i, j] = -float(w)
    rows, cols = linear_sum_assignment(cost)
    slot_of = {int(i): int(j) for i, j in zip(rows, cols) if j < m}
    return _breakdown(problem, slot_of)


def brute_force_oracle(r: Realization) -> WelfareBreakdown:
    """Exhaustive search over every load -> (renewable step | grid) assignment.

    Renewable units within one step are interchangeable, so choosing a step
    with spare capacity covers every choice of individual unit.
    """
    loads = tuple(r.loads())
    n_slots = sum(r.supply)
    if len(loads) > BRUTE_FORCE_MAX_LOADS or n_slots > BRUTE_FORCE_MAX_SLOTS:
        raise InstanceTooLarge(
            f"brute force is limited to {BRUTE_FORCE_MAX_LOADS} loads and "
            f"{BRUTE_FORCE_MAX_SLOTS} renewable units, got {len(loads)} and {n_slots}"
        )
    c = r.params.c
    capacity = list(r.supply)
    best_value = None
    best: list[int] = []
    choice = [0] * len(loads)  # 0 = grid at arrival, t > 0 = renewable at t

    def search(k: int, value: int) -> None:
        nonlocal best_value, best
        if k == len(loads):
            if best_value is None or value > best_value:
                best_value, best = value, list(choice)
            return
        load = loads[k]
        choice[k] = 0
        search(k + 1, value)
        for t in range(load.a, load.d + 1):
            if capacity[t - 1] > 0:
                capacity[t - 1] -= 1
                choice[k] = t
                search(k + 1, value + willingness_to_pay(load, t, c))
                capacity[t - 1] += 1
        choice[k] = 0

    search(0, 0)
    records = []
    for load, t in zip(loads, best):
        if t:
            records.append(make_record(load, t, Source.RES, c))
        else:
            records.append(make_record(load, load.a, Source.GS, c))
    return WelfareBreakdown.from_records(records)
