"""Arrival/supply distributions, their moments, and seeded scenario sampling.

Randomness is counter-based: every draw for step ``t`` of stream ``s`` in
trial ``i`` comes from a Philox generator whose key is ``(seed, i, s)`` and
whose counter starts at ``t``. Any trial, any step, can therefore be
regenerated on its own, and trials run in any order or in parallel give the
same realizations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import LoadSpec, MarketParams, Realization

PMF_TOL = 1e-12
_M64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid scenario or experiment configuration."""


@dataclass(frozen=True)
class DiscretePmf:
    support: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "support", tuple(int(x) for x in self.support))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    def problems(self, bound: int | None = None) -> list[str]:
        out = []
        if not self.support:
            out.append("empty support")
        if len(self.support) != len(self.probs):
            out.append(f"{len(self.support)} support values but {len(self.probs)} probabilities")
        if len(set(self.support)) != len(self.support):
            out.append("support values are not distinct")
        if any(x < 0 for x in self.support):
            out.append("negative support value")
        if any(p < 0 or not math.isfinite(p) for p in self.probs):
            out.append("probabilities must be finite and non-negative")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > PMF_TOL:
            out.append(f"probabilities sum to {total!r}, expected 1")
        if bound is not None and self.support and max(self.support) > bound:
            out.append(f"support value {max(self.support)} exceeds bound {bound}")
        return out

    @classmethod
    def uniform(cls, lo: int, hi: int) -> DiscretePmf:
        k = hi - lo + 1
        return cls(tuple(range(lo, hi + 1)), (1.0 / k,) * k)

    @classmethod
    def point(cls, x: int) -> DiscretePmf:
        return cls((x,), (1.0,))

    @property
    def mean(self) -> float:
        return math.fsum(p * x for x, p in zip(self.support, self.probs))

    @property
    def variance(self) -> float:
        mu = self.mean
        return math.fsum(p * (x - mu) ** 2 for x, p in zip(self.support, self.probs))

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def upper(self) -> int:
        return max(self.support)

    def cdf_table(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.support)
        values = np.asarray(self.support, dtype=np.int64)[order]
        cdf = np.cumsum(np.asarray(self.probs)[order])
        return values, cdf


@dataclass(frozen=True)
class MomentSummary:
    mu_n: float
    sigma_n: float
    mu_s: float
    sigma_s: float
    sigma_combined: float
    n_sm: float


def moments(n_pmf: DiscretePmf, s_pmf: DiscretePmf) -> MomentSummary:
    """Exact moments of both processes, including ``E[min(n_t, S_t)]``.

    ``n_t`` and ``S_t`` are independent, so the expected minimum is a plain
    double sum over the two supports.
    """
    n_sm = math.fsum(
        pn * ps * min(xn, xs)
        for xn, pn in zip(n_pmf.support, n_pmf.probs)
        for xs, ps in zip(s_pmf.support, s_pmf.probs)
    )
    sn, ss = n_pmf.std, s_pmf.std
    return MomentSummary(
        mu_n=n_pmf.mean,
        sigma_n=sn,
        mu_s=s_pmf.mean,
        sigma_s=ss,
        sigma_combined=math.sqrt(n_pmf.variance + s_pmf.variance),
        n_sm=n_sm,
    )


def nearest_support_value(pmf: DiscretePmf) -> int:
    """Support point closest to the mean; the lower one on an exact tie."""
    mu = pmf.mean
    return min(pmf.support, key=lambda x: (abs(x - mu), x))


def scale_variance(pmf: DiscretePmf, lam: float) -> DiscretePmf:
    """Mix ``pmf`` with a point mass to shrink its spread.

    Returns ``lam * pmf + (1 - lam) * delta_m`` where ``m`` is the support
    value nearest the mean ``mu``. The result has

        variance = lam * var(pmf) + lam * (1 - lam) * (mu - m) ** 2
        mean     = lam * mu + (1 - lam) * m

    so the mean is preserved exactly whenever it lies on the support.
    Zero-probability entries are dropped.
    """
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"variance scale must lie in [0, 1], got {lam}")
    if lam == 1.0:
        return pmf
    m = nearest_support_value(pmf)
    support, probs = [], []
    for x, p in zip(pmf.support, pmf.probs):
        q = lam * p + ((1.0 - lam) if x == m else 0.0)
        if q > 0.0:
            support.append(x)
            probs.append(q)
    # renormalise away float residue so the PMF_TOL check always holds
    total = math.fsum(probs)
    return DiscretePmf(tuple(support), tuple(q / total for q in probs))


class AssignerMode(str, enum.Enum):
    FIXED_TABLE = "fixed_table"
    UNIFORM_RANDOM = "uniform_random"
    LATER_HIGHER_CRITICALITY = "later_higher_criticality"


@dataclass(frozen=True)
class LoadAssignerSpec:
    """How deadlines and criticalities are attached to arriving loads.

    Criticalities are in micro-dollars per step. ``table`` holds
    ``(slack, b)`` pairs and is only read in ``fixed_table`` mode, cyclically
    by load ordinal.
    """

    mode: AssignerMode = AssignerMode.UNIFORM_RANDOM
    deadline_window: tuple[int, int] = (0, 3)
    criticality_range: tuple[int, int] = (0, 1_000_000)
    table: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", AssignerMode(self.mode))
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        lo, hi = self.deadline_window
        if lo < 0 or hi < lo:
            out.append(f"deadline window {self.deadline_window} must satisfy 0 <= min <= max")
        b_lo, b_hi = self.criticality_range
        if b_lo < 0 or b_hi < b_lo:
            out.append(f"criticality range {self.criticality_range} must satisfy 0 <= min <= max")
        if self.mode is AssignerMode.FIXED_TABLE:
            if not self.table:
                out.append("fixed_table mode needs a non-empty table")
            for i, (slack, b) in enumerate(self.table):
                if slack < 0 or b < 0:
                    out.append(f"table entry {i} has negative slack or criticality")
        return out


@dataclass(frozen=True)
class ScenarioConfig:
    params: MarketParams
    n_pmf: DiscretePmf
    s_pmf: DiscretePmf
    lam: float = 1.0
    load_assigner: LoadAssignerSpec = field(default_factory=LoadAssignerSpec)
    seed: int = 0
    n_bar: int | None = None
    s_bar: int | None = None

    def __post_init__(self) -> None:
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not 0.0 <= self.lam <= 1.0:
            out.append(f"lambda must lie in [0, 1], got {self.lam}")
        out.extend(f"arrivals: {p}" for p in self.n_pmf.problems(self.n_bar))
        out.extend(f"supply: {p}" for p in self.s_pmf.problems(self.s_bar))
        return out

    def with_lambda(self, lam: float) -> ScenarioConfig:
        return replace(self, lam=lam)

    def effective_pmfs(self) -> tuple[DiscretePmf, DiscretePmf]:
        return scale_variance(self.n_pmf, self.lam), scale_variance(self.s_pmf, self.lam)

    def moments(self) -> MomentSummary:
        return moments(*self.effective_pmfs())


class Stream(enum.IntEnum):
    ARRIVALS = 0
    SUPPLY = 1
    LOADS = 2


def stream_rng(seed: int, trial: int, stream: int, t: int) -> np.random.Generator:
    """Generator for one (seed, trial, stream, step) cell."""
    if trial < 0 or trial >= 1 << 56:
        raise ValueError(f"trial index out of range: {trial}")
    key = ((seed & _M64) << 64) | (trial << 8) | int(stream)
    return np.random.Generator(np.random.Philox(key=key, counter=t))


def _draw(pmf_table: tuple[np.ndarray, np.ndarray], rng: np.random.Generator) -> int:
    values, cdf = pmf_table
    i = int(np.searchsorted(cdf, rng.random(), side="right"))
    return int(values[min(i, len(values) - 1)])


def _b_cap(c: int, slack: int) -> int:
    # largest b keeping c - b * slack strictly positive
    return (c - 1) // slack if slack > 0 else c


def _assign_loads(
    spec: LoadAssignerSpec,
    params: MarketParams,
    t: int,
    count: int,
    first_id: int,
    rng: np.random.Generator,
) -> list[LoadSpec]:
    T, c = params.T, params.c
    lo, hi = spec.deadline_window
    b_lo, b_hi = spec.criticality_range
    loads = []
    for j in range(count):
        ordinal = first_id + j
        if spec.mode is AssignerMode.FIXED_TABLE:
            slack, b = spec.table[(ordinal - 1) % len(spec.table)]
        elif spec.mode is AssignerMode.UNIFORM_RANDOM:
            slack = int(rng.integers(lo, hi + 1))
            b = int(round(rng.uniform(b_lo, b_hi)))
        else:
            slack = int(rng.integers(lo, hi + 1))
            # disjoint per-step bands keep b non-decreasing in arrival time
            width = (b_hi - b_lo) / T
            b = int(math.floor(b_lo + width * (t - 1) + width * rng.random()))
            b = min(max(b, b_lo), b_hi, _b_cap(c, hi))
        d = min(t + slack, T)
        b = min(b, _b_cap(c, d - t))
        loads.append(LoadSpec(id=ordinal, a=t, d=d, b=b))
    return loads


def sample_realization(config: ScenarioConfig, trial: int = 0) -> Realization:
    """Draw one realization; a pure function of ``(config, trial)``."""
    n_pmf, s_pmf = config.effective_pmfs()
    n_table, s_table = n_pmf.cdf_table(), s_pmf.cdf_table()
    params = config.params
    arrivals = []
    supply = []
    next_id = 1
    for t in range(1, params.T + 1):
        n_t = _draw(n_table, stream_rng(config.seed, trial, Stream.ARRIVALS, t))
        s_t = _draw(s_table, stream_rng(config.seed, trial, Stream.SUPPLY, t))
        step = _assign_loads(
            config.load_assigner,
            params,
            t,
            n_t,
            next_id,
            stream_rng(config.seed, trial, Stream.LOADS, t),
        )
        next_id += n_t
        arrivals.append(tuple(step))
        supply.append(s_t)
    return Realization(
        params,
        tuple(arrivals),
        tuple(supply),
        supply_bound=config.s_bar if config.s_bar is not None else config.s_pmf.upper,
        arrival_bound=config.n_bar if config.n_bar is not None else config.n_pmf.upper,
    )


def sample_many(config: ScenarioConfig, trials: Sequence[int]) -> list[Realization]:
    return [sample_realization(config, i) for i in trials]


__all__ = [
    "AssignerMode",
    "ConfigError",
    "DiscretePmf",
    "LoadAssignerSpec",
    "MomentSummary",
    "ScenarioConfig",
    "Stream",
    "moments",
    "nearest_support_value",
    "sample_realization",
    "scale_variance",
    "stream_rng",
]
