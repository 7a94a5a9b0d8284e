"""Domain types and willingness-to-pay/welfare arithmetic.

Money is held as integer micro-dollars everywhere inside the library so that
welfare sums are exact. Conversion to and from dollars happens only when
reading configuration or writing output (see :func:`to_micro`,
:func:`format_money`).

Renewable energy is free to the platform: a renewable match contributes the
load's full willingness to pay, a grid match contributes ``pi - c``.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_EVEN
from typing import Iterable, Iterator, Sequence

MICRO = 1_000_000


class ContractViolation(ValueError):
    """A precondition of a domain operation was not met."""


def to_micro(dollars: float | int | str | Decimal) -> int:
    """Convert a dollar amount to integer micro-dollars (banker's rounding)."""
    q = (Decimal(str(dollars)) * MICRO).quantize(Decimal(1), rounding=ROUND_HALF_EVEN)
    return int(q)


def from_micro(micro: int) -> float:
    return micro / MICRO


def format_money(micro: int) -> str:
    """Exact decimal string of a micro-dollar amount, e.g. ``-1.500000``."""
    sign = "-" if micro < 0 else ""
    whole, frac = divmod(abs(int(micro)), MICRO)
    return f"{sign}{whole}.{frac:06d}"


class Source(str, enum.Enum):
    RES = "RES"
    GS = "GS"


@dataclass(frozen=True, order=True)
class LoadSpec:
    """A unit-demand flexible load.

    ``b`` is the criticality in micro-dollars per step: the amount the load's
    willingness to pay drops for every step it waits after arrival.
    """

    id: int
    a: int
    d: int
    b: int

    @property
    def slack(self) -> int:
        return self.d - self.a

    def active_at(self, t: int) -> bool:
        return self.a <= t <= self.d


@dataclass(frozen=True)
class MarketParams:
    c: int
    T: int
    unit_energy: float = 0.1  # MWh per load unit, documentation only

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ContractViolation(f"grid price must be positive, got {self.c}")
        if self.T < 1:
            raise ContractViolation(f"horizon must be at least 1 step, got {self.T}")


@dataclass(frozen=True)
class Realization:
    """One sampled scenario.

    ``arrivals[t - 1]`` holds the loads arriving at step ``t`` and
    ``supply[t - 1]`` the renewable units available at ``t`` (steps are
    1-based).
    """

    params: MarketParams
    arrivals: tuple[tuple[LoadSpec, ...], ...]
    supply: tuple[int, ...]
    supply_bound: int | None = None
    arrival_bound: int | None = None

    def arrivals_at(self, t: int) -> tuple[LoadSpec, ...]:
        return self.arrivals[t - 1]

    def supply_at(self, t: int) -> int:
        return self.supply[t - 1]

    def loads(self) -> Iterator[LoadSpec]:
        for step in self.arrivals:
            yield from step

    @property
    def n_loads(self) -> int:
        return sum(len(step) for step in self.arrivals)

    def digest(self) -> str:
        """Short content hash; equal realizations give equal digests."""
        h = hashlib.sha256()
        h.update(f"c={self.params.c};T={self.params.T};".encode())
        for t, (step, s) in enumerate(zip(self.arrivals, self.supply), start=1):
            h.update(f"t={t};S={s};".encode())
            for load in step:
                h.update(f"{load.id},{load.a},{load.d},{load.b};".encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class MatchRecord:
    load_id: int
    t: int
    source: Source
    utility: int
    cost: int

    @property
    def welfare(self) -> int:
        return self.utility - self.cost


@dataclass(frozen=True)
class WelfareBreakdown:
    total: int
    w_rs: int
    w_gs: int
    grid_payment: int
    records: tuple[MatchRecord, ...] = field(default=())

    @classmethod
    def from_records(cls, records: Iterable[MatchRecord]) -> WelfareBreakdown:
        records = tuple(records)
        w_rs = sum(r.welfare for r in records if r.source is Source.RES)
        w_gs = sum(r.welfare for r in records if r.source is Source.GS)
        grid_payment = -sum(r.cost for r in records if r.source is Source.GS)
        return cls(w_rs + w_gs, w_rs, w_gs, grid_payment, records)

    def by_load(self) -> dict[int, MatchRecord]:
        return {r.load_id: r for r in self.records}


def willingness_to_pay(load: LoadSpec, t: int, c: int) -> int:
    """Utility of serving ``load`` at step ``t``: ``c - b * (t - a)``."""
    if not load.active_at(t):
        raise ContractViolation(
            f"load {load.id} is not active at t={t} (window [{load.a}, {load.d}])"
        )
    return c - load.b * (t - load.a)


def make_record(load: LoadSpec, t: int, source: Source, c: int) -> MatchRecord:
    pi = willingness_to_pay(load, t, c)
    return MatchRecord(load.id, t, source, pi, c if source is Source.GS else 0)


def record_welfare(record: MatchRecord) -> int:
    return record.welfare


def validate_load(load: LoadSpec, c: int, T: int | None = None) -> list[str]:
    problems = []
    if load.d < load.a:
        problems.append(f"load {load.id}: deadline {load.d} before arrival {load.a}")
    if load.b < 0:
        problems.append(f"load {load.id}: negative criticality {load.b}")
    if c - load.b * (load.d - load.a) <= 0:
        problems.append(
            f"load {load.id}: willingness to pay reaches {c - load.b * (load.d - load.a)}"
            " at deadline, must stay positive"
        )
    if T is not None and (load.a < 1 or load.d > T):
        problems.append(f"load {load.id}: window [{load.a}, {load.d}] outside horizon 1..{T}")
    return problems


def validate_realization(r: Realization) -> list[str]:
    """Return every invariant violation in ``r``; an empty list means valid."""
    problems: list[str] = []
    T, c = r.params.T, r.params.c
    if len(r.arrivals) != T:
        problems.append(f"arrivals has {len(r.arrivals)} steps, horizon is {T}")
    if len(r.supply) != T:
        problems.append(f"supply has {len(r.supply)} steps, horizon is {T}")
    seen: set[int] = set()
    for t, step in enumerate(r.arrivals, start=1):
        if r.arrival_bound is not None and len(step) > r.arrival_bound:
            problems.append(f"t={t}: {len(step)} arrivals exceeds bound {r.arrival_bound}")
        for load in step:
            if load.id in seen:
                problems.append(f"load {load.id}: duplicate id")
            seen.add(load.id)
            if load.a != t:
                problems.append(f"load {load.id}: listed at t={t} but arrives at {load.a}")
            problems.extend(validate_load(load, c, T))
    for t, s in enumerate(r.supply, start=1):
        if s < 0:
            problems.append(f"t={t}: negative supply {s}")
        if r.supply_bound is not None and s > r.supply_bound:
            problems.append(f"t={t}: supply {s} exceeds bound {r.supply_bound}")
    return problems


def realization_from_loads(
    params: MarketParams,
    loads: Sequence[LoadSpec],
    supply: Sequence[int],
) -> Realization:
    """Group a flat list of loads by arrival step."""
    steps: list[list[LoadSpec]] = [[] for _ in range(params.T)]
    for load in sorted(loads, key=lambda l: (l.a, l.id)):
        steps[load.a - 1].append(load)
    return Realization(params, tuple(tuple(s) for s in steps), tuple(int(s) for s in supply))
