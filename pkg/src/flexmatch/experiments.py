"""Monte Carlo estimation of competitive ratios, sweeps and deviation fits.

Every trial draws one realization and feeds it to the oracle and to every
policy under study (common random numbers). Aggregation always runs in
trial-index order so the numbers do not depend on how trials were
scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import MICRO, WelfareBreakdown
from .online import PolicyId, m2_quota_gap, run_online
from .oracle import oracle_solve
from .scenarios import ConfigError, ScenarioConfig, sample_realization


@dataclass(frozen=True)
class TrialResult:
    trial: int
    realization_hash: str
    oracle: WelfareBreakdown
    policies: dict[PolicyId, WelfareBreakdown]


def check_compatible(config: ScenarioConfig, policies: Iterable[PolicyId]) -> None:
    for p in policies:
        if p.uses_m2_quota:
            m2_quota_gap(config.moments())


def run_trial(config: ScenarioConfig, trial: int, policies: Sequence[PolicyId]) -> TrialResult:
    r = sample_realization(config, trial)
    mom = config.moments()
    return TrialResult(
        trial=trial,
        realization_hash=r.digest(),
        oracle=oracle_solve(r),
        policies={p: run_online(p, r, mom) for p in policies},
    )


def _run_chunk(args: tuple[ScenarioConfig, range, tuple[PolicyId, ...]]) -> list[TrialResult]:
    config, trials, policies = args
    return [run_trial(config, i, policies) for i in trials]


def run_trials(
    config: ScenarioConfig,
    trials: int,
    policies: Sequence[PolicyId | str],
    workers: int = 1,
) -> list[TrialResult]:
    pols = tuple(PolicyId.parse(p) for p in policies)
    check_compatible(config, pols)
    if workers <= 1 or trials < 2 * workers:
        return _run_chunk((config, range(trials), pols))
    size = math.ceil(trials / (workers * 4))
    chunks = [(config, range(lo, min(lo + size, trials)), pols) for lo in range(0, trials, size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, chunks))
    out = [res for part in parts for res in part]
    out.sort(key=lambda res: res.trial)
    return out


@dataclass(frozen=True)
class CREstimate:
    """Ratio of mean policy welfare to mean oracle welfare over ``trials``.

    Welfare sums are exact micro-dollar integers; the means are reported in
    dollars.
    """

    policy: PolicyId
    trials: int
    sum_w_alg: int
    sum_w_oracle: int
    mean_w_alg: float
    mean_w_oracle: float
    stderr_w_alg: float
    cr: float
    stderr_cr: float
    seed: int


def ratio_stats(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Ratio of means ``mean(x) / mean(y)`` and its delta-method standard error."""
    n = len(x)
    mx, my = float(x.mean()), float(y.mean())
    if my == 0.0:
        return math.nan, math.nan
    r = mx / my
    if n < 2:
        return r, math.nan
    cov = np.cov(np.vstack([x, y]), ddof=1)
    var = (cov[0, 0] - 2.0 * r * cov[0, 1] + r * r * cov[1, 1]) / (n * my * my)
    return r, math.sqrt(max(float(var), 0.0))


def summarize(results: Sequence[TrialResult], seed: int = 0) -> list[CREstimate]:
    if len(results) < 2:
        raise ConfigError(f"need at least 2 trials, got {len(results)}")
    n = len(results)
    y_int = [res.oracle.total for res in results]
    y = np.asarray(y_int, dtype=float) / MICRO
    out = []
    for p in results[0].policies:
        x_int = [res.policies[p].total for res in results]
        x = np.asarray(x_int, dtype=float) / MICRO
        cr, se = ratio_stats(x, y)
        if sum(x_int) == sum(y_int):
            cr = 1.0
        out.append(
            CREstimate(
                policy=p,
                trials=n,
                sum_w_alg=sum(x_int),
                sum_w_oracle=sum(y_int),
                mean_w_alg=sum(x_int) / n / MICRO,
                mean_w_oracle=sum(y_int) / n / MICRO,
                stderr_w_alg=float(x.std(ddof=1)) / math.sqrt(n),
                cr=cr,
                stderr_cr=se,
                seed=seed,
            )
        )
    return out


def oracle_stderr(results: Sequence[TrialResult]) -> float:
    y = np.asarray([res.oracle.total for res in results], dtype=float) / MICRO
    return float(y.std(ddof=1)) / math.sqrt(len(y))


def estimate_cr(
    config: ScenarioConfig,
    policies: Sequence[PolicyId | str],
    trials: int,
    workers: int = 1,
) -> list[CREstimate]:
    if trials < 2:
        raise ConfigError(f"need at least 2 trials, got {trials}")
    return summarize(run_trials(config, trials, policies, workers), seed=config.seed)


@dataclass(frozen=True)
class SweepRow:
    lam: float
    sigma: float
    policy: PolicyId
    cr: float
    stderr: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...] = field(default=())

    def for_policy(self, policy: PolicyId | str) -> list[SweepRow]:
        p = PolicyId.parse(policy)
        return sorted((r for r in self.rows if r.policy is p), key=lambda r: r.lam)


def co_sweep(
    base_config: ScenarioConfig,
    lambda_grid: Sequence[float],
    policies: Sequence[PolicyId | str],
    trials: int,
    workers: int = 1,
) -> SweepResult:
    """Competitive ratio at each variance scale; sigma is recomputed per row."""
    if 0.0 not in lambda_grid or 1.0 not in lambda_grid:
        raise ConfigError("lambda grid must include both 0 and 1")
    rows = []
    for lam in lambda_grid:
        cfg = base_config.with_lambda(float(lam))
        sigma = cfg.moments().sigma_combined
        for est in estimate_cr(cfg, policies, trials, workers):
            rows.append(SweepRow(float(lam), sigma, est.policy, est.cr, est.stderr_cr))
    return SweepResult(tuple(rows))


@dataclass(frozen=True)
class DeviationFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    r2: float


def fit_line(x: Sequence[float], y: Sequence[float]) -> DeviationFit:
    """Ordinary least squares ``y ~ intercept + slope * x`` with classical errors."""
    xs, ys = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    n = len(xs)
    if n < 3:
        raise ConfigError(f"deviation fit needs at least 3 rows, got {n}")
    xbar, ybar = xs.mean(), ys.mean()
    sxx = float(((xs - xbar) ** 2).sum())
    if sxx <= 1e-15 * max(1.0, float((xs**2).sum())):
        raise ConfigError("deviation fit is degenerate: all sigma values are equal")
    slope = float(((xs - xbar) * (ys - ybar)).sum()) / sxx
    intercept = float(ybar - slope * xbar)
    resid = ys - (intercept + slope * xs)
    ssr = float((resid**2).sum())
    sst = float(((ys - ybar) ** 2).sum())
    s2 = ssr / (n - 2)
    return DeviationFit(
        slope=slope,
        intercept=intercept,
        slope_stderr=math.sqrt(s2 / sxx),
        intercept_stderr=math.sqrt(s2 * (1.0 / n + xbar * xbar / sxx)),
        r2=1.0 - ssr / sst if sst > 0 else 1.0,
    )


def fit_deviation(sweep: SweepResult, policy: PolicyId | str | None = None) -> DeviationFit:
    """Fit ``1 - cr`` against combined sigma over the sweep rows of one policy."""
    rows = list(sweep.rows) if policy is None else sweep.for_policy(policy)
    if policy is None and len({r.policy for r in rows}) > 1:
        raise ConfigError("sweep holds several policies; pass the one to fit")
    return fit_line([r.sigma for r in rows], [1.0 - r.cr for r in rows])


def paired_gap(results: Sequence[TrialResult], a: PolicyId, b: PolicyId) -> tuple[float, float]:
    """Mean per-trial welfare difference ``a - b`` (dollars) and its standard error.

    Both policies saw the same realization in every trial, so the paired
    difference carries the common-random-numbers variance reduction.
    """
    d = np.asarray([res.policies[a].total - res.policies[b].total for res in results], dtype=float) / MICRO
    return float(d.mean()), float(d.std(ddof=1)) / math.sqrt(len(d))
