"""Run an :class:`ExperimentSpec` and write its CSV artifacts.

Every artifact is a deterministic function of the spec: no timestamps, no
host details, rows ordered by trial index. Rerunning with the recorded seed
reproduces the files byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np

from .config import ExperimentSpec, msigma_for
from .core import LoadSpec, MarketParams, Realization, format_money, realization_from_loads
from .experiments import (
    CREstimate,
    TrialResult,
    co_sweep,
    fit_deviation,
    oracle_stderr,
    paired_gap,
    run_trials,
    summarize,
)
from .invariants import audit_online
from .online import PolicyId
from .oracle import brute_force_oracle, oracle_solve
from .scenarios import sample_realization, stream_rng

log = logging.getLogger(__name__)

SIMULATE_HEADER = ["trial", "policy", "welfare", "w_rs", "w_gs", "grid_payment", "oracle_welfare", "realization_hash"]
SWEEP_HEADER = ["lambda", "sigma", "policy", "cr", "stderr"]
TABLE_HEADER = ["scenario", "policy", "mean_welfare", "stderr"]
ORACLE_CHECK_HEADER = ["instance", "horizon", "loads", "units", "oracle_welfare", "brute_force_welfare", "agree"]
FIT_HEADER = ["policy", "slope", "intercept", "slope_stderr", "intercept_stderr", "r2"]

ORACLE_CHECK_STREAM = 7


def fmt(x: float) -> str:
    return f"{x:.9f}"


@dataclass
class RunReport:
    exit_code: int = 0
    artifacts: list[Path] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    summary: list[str] = field(default_factory=list)


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def _manifest(spec: ExperimentSpec, report: RunReport) -> Path:
    doc = {
        "name": spec.name,
        "mode": spec.mode,
        "seed": spec.seed,
        "trials": spec.trials,
        "policies": list(spec.policies),
        "artifacts": [p.name for p in report.artifacts],
    }
    if spec.mode == "sweep":
        doc["lambda_grid"] = list(spec.lambda_grid)
    if spec.mode == "table":
        doc["scenarios"] = [name for name, _ in spec.scenarios]
    path = spec.out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _summary_lines(title: str, estimates: list[CREstimate]) -> list[str]:
    lines = [title, f"{'policy':<10} {'E[W] ($)':>12} {'CR':>10} {'stderr':>10}"]
    if estimates:
        lines.append(f"{'oracle':<10} {estimates[0].mean_w_oracle:>12.3f} {1.0:>10.6f} {0.0:>10.6f}")
    for e in estimates:
        lines.append(f"{e.policy.value:<10} {e.mean_w_alg:>12.3f} {e.cr:>10.6f} {e.stderr_cr:>10.6f}")
    return lines


def run_simulate(spec: ExperimentSpec, report: RunReport) -> None:
    scenario = spec.scenario
    policies = spec.resolved_policies()
    mom = scenario.moments()
    results: list[TrialResult] = []
    rows = []
    for trial in range(spec.trials):
        r = sample_realization(scenario, trial)
        oracle = oracle_solve(r)
        per_policy = {}
        for p in policies:
            wb, problems = audit_online(p, r, mom)
            if wb.total > oracle.total:
                problems.append(f"welfare {wb.total} exceeds oracle {oracle.total}")
            for msg in problems:
                report.violations.append(f"seed={spec.seed} trial={trial} policy={p.value}: {msg}")
            per_policy[p] = wb
            rows.append([
                str(trial), p.value, format_money(wb.total), format_money(wb.w_rs),
                format_money(wb.w_gs), format_money(wb.grid_payment),
                format_money(oracle.total), r.digest(),
            ])
        results.append(TrialResult(trial, r.digest(), oracle, per_policy))
    report.artifacts.append(_write_csv(spec.out / "simulate.csv", SIMULATE_HEADER, rows))
    report.summary += _summary_lines(f"{spec.name}: {spec.trials} trials, seed {spec.seed}", summarize(results, spec.seed))


def run_sweep(spec: ExperimentSpec, report: RunReport) -> None:
    policies = spec.resolved_policies()
    sweep = co_sweep(spec.scenario, spec.lambda_grid, policies, spec.trials, spec.workers)
    rows = [[f"{row.lam:g}", fmt(row.sigma), row.policy.value, fmt(row.cr), fmt(row.stderr)] for row in sweep.rows]
    report.artifacts.append(_write_csv(spec.out / "sweep.csv", SWEEP_HEADER, rows))
    fit_rows = []
    report.summary.append(f"{spec.name}: sweep over lambda {list(spec.lambda_grid)}, {spec.trials} trials, seed {spec.seed}")
    for p in policies:
        for row in sweep.for_policy(p):
            report.summary.append(f"  {p.value:<8} lambda={row.lam:<5g} sigma={row.sigma:.4f} cr={row.cr:.6f} +- {row.stderr:.6f}")
        f = fit_deviation(sweep, p)
        fit_rows.append([p.value, fmt(f.slope), fmt(f.intercept), fmt(f.slope_stderr), fmt(f.intercept_stderr), fmt(f.r2)])
        report.summary.append(
            f"  {p.value:<8} 1-cr ~ {f.intercept:.5f} (+-{f.intercept_stderr:.5f}) "
            f"+ {f.slope:.5f} (+-{f.slope_stderr:.5f}) * sigma, r2={f.r2:.4f}"
        )
    report.artifacts.append(_write_csv(spec.out / "deviation_fit.csv", FIT_HEADER, fit_rows))


def run_table(spec: ExperimentSpec, report: RunReport) -> None:
    rows = []
    report.summary.append(f"{spec.name}: {spec.trials} trials per scenario, seed {spec.seed}")
    report.summary.append(f"{'scenario':<12} {'policy':<8} {'E[W] ($)':>12} {'stderr':>9}")
    for name, scenario in spec.scenarios:
        policies = spec.resolved_policies(scenario)
        results = run_trials(scenario, spec.trials, policies, spec.workers)
        estimates = summarize(results, spec.seed)
        rows.append([name, "oracle", fmt(estimates[0].mean_w_oracle), fmt(oracle_stderr(results))])
        report.summary.append(f"{name:<12} {'oracle':<8} {estimates[0].mean_w_oracle:>12.3f} {oracle_stderr(results):>9.3f}")
        for e in estimates:
            rows.append([name, e.policy.value, fmt(e.mean_w_alg), fmt(e.stderr_w_alg)])
            report.summary.append(f"{name:<12} {e.policy.value:<8} {e.mean_w_alg:>12.3f} {e.stderr_w_alg:>9.3f}")
        proposed = msigma_for(scenario)
        baselines = [p for p in policies if p in (PolicyId.EDF, PolicyId.MH)]
        if proposed in policies and baselines:
            best = max(baselines, key=lambda p: next(e.mean_w_alg for e in estimates if e.policy is p))
            gap, se = paired_gap(results, proposed, best)
            report.summary.append(f"{'':<12} {proposed.value} - {best.value}: {gap:.3f} (paired stderr {se:.3f})")
    report.artifacts.append(_write_csv(spec.out / "table.csv", TABLE_HEADER, rows))


def tiny_instance(seed: int, index: int, params: MarketParams, max_loads: int = 8, max_units: int = 12) -> Realization:
    """A small random realization the brute-force oracle can handle.

    Criticalities come from a coarse grid so that ties in willingness to pay
    are common.
    """
    rng = stream_rng(seed, index, ORACLE_CHECK_STREAM, 0)
    T = int(rng.integers(1, params.T + 1))
    c = params.c
    n = int(rng.integers(0, max_loads + 1))
    loads = []
    for _ in range(n):
        a = int(rng.integers(1, T + 1))
        d = int(rng.integers(a, T + 1))
        step = c // 8
        cap = (c - 1) // (d - a) if d > a else c
        b = min(int(rng.integers(0, 6)) * step, cap)
        loads.append((a, d, b))
    loads.sort()
    specs = [LoadSpec(i + 1, a, d, b) for i, (a, d, b) in enumerate(loads)]
    supply = [int(x) for x in rng.integers(0, 5, size=T)]
    while sum(supply) > max_units:
        supply[int(np.argmax(supply))] -= 1
    return realization_from_loads(MarketParams(c, T, params.unit_energy), specs, supply)


def run_oracle_check(spec: ExperimentSpec, report: RunReport) -> None:
    chk = spec.oracle_check
    rows = []
    agree = 0
    for i in range(chk.instances):
        r = tiny_instance(spec.seed, i, spec.scenario.params, chk.max_loads, chk.max_units)
        fast, slow = oracle_solve(r).total, brute_force_oracle(r).total
        ok = fast == slow
        agree += ok
        if not ok:
            report.violations.append(f"seed={spec.seed} instance={i}: oracle {fast} != brute force {slow}")
        rows.append([str(i), str(r.params.T), str(r.n_loads), str(sum(r.supply)), format_money(fast), format_money(slow), "yes" if ok else "no"])
    report.artifacts.append(_write_csv(spec.out / "oracle_check.csv", ORACLE_CHECK_HEADER, rows))
    report.summary.append(f"{agree}/{chk.instances} agree")


_MODES = {
    "simulate": run_simulate,
    "sweep": run_sweep,
    "table": run_table,
    "oracle-check": run_oracle_check,
}


def run_experiment(spec: ExperimentSpec, stream: TextIO | None = None) -> RunReport:
    """Execute ``spec``; exit code is nonzero if any audited invariant failed."""
    stream = stream if stream is not None else sys.stdout
    report = RunReport()
    spec.out.mkdir(parents=True, exist_ok=True)
    _MODES[spec.mode](spec, report)
    report.artifacts.append(_manifest(spec, report))
    for line in report.summary:
        print(line, file=stream)
    if report.violations:
        report.exit_code = 1
        print(f"{len(report.violations)} invariant violations:", file=stream)
        for v in report.violations[:50]:
            print(f"  {v}", file=stream)
    return report
