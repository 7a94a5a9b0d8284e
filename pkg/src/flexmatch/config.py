"""JSON experiment configuration, presets and validation.

A config document has five sections; every one is optional::

    {
      "name": "my-run",
      "market":   {"price_per_kwh": 0.13, "unit_energy_mwh": 0.1, "horizon": 10},
      "arrivals": {"uniform": [1, 5]},
      "supply":   {"support": [3, 4, 5], "probs": [0.25, 0.5, 0.25], "bound": 8},
      "loads":    {"mode": "uniform_random", "deadline_window": [2, 6],
                   "criticality_range": [0.5, 4.0]},
      "experiment": {"mode": "simulate", "policies": ["msigma", "edf", "mh"],
                     "trials": 3000, "seed": 20240601, "lambda": 1.0}
    }

Money in the file is in dollars: ``price`` (per load unit) or
``price_per_kwh`` (multiplied by the unit size), criticality in dollars per
unit per step. A distribution is either ``{"support": [...], "probs":
[...]}``, ``{"uniform": [lo, hi]}`` or ``{"point": x}``, each with an
optional ``bound``.

``"extends": "<preset>"`` starts from a bundled preset and overrides it
section by section. ``FLEXMATCH_SEED`` and ``FLEXMATCH_TRIALS`` override the
seed and trial count from the environment; command-line flags win over both.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

from .core import ContractViolation, MarketParams, to_micro
from .online import PolicyId
from .scenarios import (
    AssignerMode,
    ConfigError,
    DiscretePmf,
    LoadAssignerSpec,
    ScenarioConfig,
)

DEFAULT_SEED = 20240601
DEFAULT_TRIALS = 3000
DEFAULT_LAMBDA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
SEED_ENV = "FLEXMATCH_SEED"
TRIALS_ENV = "FLEXMATCH_TRIALS"
MODES = ("simulate", "sweep", "table", "oracle-check")
MSIGMA = "msigma"

_DEFAULTS: dict[str, Any] = {
    "market": {"price_per_kwh": 0.13, "unit_energy_mwh": 0.1, "horizon": 10},
    "arrivals": {"uniform": [1, 5]},
    "supply": {"uniform": [0, 8], "bound": 8},
    "loads": {"mode": "uniform_random", "deadline_window": [2, 6], "criticality_range": [0.5, 4.0]},
    "experiment": {"mode": "simulate"},
}


class ConfigValidationError(ConfigError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class OracleCheckSpec:
    instances: int = 200
    max_loads: int = 8
    max_units: int = 12


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    scenario: ScenarioConfig
    policies: tuple[str, ...]
    trials: int
    seed: int
    mode: str = "simulate"
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    scenarios: tuple[tuple[str, ScenarioConfig], ...] = ()
    out: Path = Path("results")
    workers: int = 1
    oracle_check: OracleCheckSpec = field(default_factory=OracleCheckSpec)

    def resolved_policies(self, scenario: ScenarioConfig | None = None) -> list[PolicyId]:
        return resolve_policies(self.policies, scenario or self.scenario)


def preset_names() -> list[str]:
    files = resources.files("flexmatch.presets").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def preset_document(name: str) -> dict[str, Any]:
    res = resources.files("flexmatch.presets").joinpath(f"{name}.json")
    if not res.is_file():
        raise ConfigValidationError([f"unknown preset {name!r}; available: {', '.join(preset_names())}"])
    return json.loads(res.read_text())


def msigma_for(scenario: ScenarioConfig) -> PolicyId:
    """The proposed online policy for this scenario, run without step 3."""
    m = scenario.moments()
    return PolicyId.M1_NO_STEP3 if m.mu_n < m.mu_s else PolicyId.M2_NO_STEP3


def resolve_policies(names: Sequence[str], scenario: ScenarioConfig) -> list[PolicyId]:
    out: list[PolicyId] = []
    for name in names:
        p = msigma_for(scenario) if name == MSIGMA else PolicyId.parse(name)
        if p not in out:
            out.append(p)
    return out


def _merge(base: Mapping[str, Any], over: Mapping[str, Any]) -> dict[str, Any]:
    doc = {k: dict(v) if isinstance(v, Mapping) else v for k, v in base.items()}
    for key, value in over.items():
        if key == "extends":
            continue
        if isinstance(value, Mapping) and key != "experiment" and key in doc:
            # a distribution given in a new form replaces the old one wholesale
            if key in ("arrivals", "supply") and not set(value) <= {"bound"}:
                doc[key] = {k: v for k, v in doc[key].items() if k == "bound"} | dict(value)
            else:
                doc[key] = {**doc[key], **value}
        elif isinstance(value, Mapping) and key == "experiment":
            doc[key] = {**doc.get(key, {}), **value}
        else:
            doc[key] = value
    return doc


def _resolve_document(doc: Mapping[str, Any], seen: tuple[str, ...] = ()) -> dict[str, Any]:
    parent = doc.get("extends")
    if parent is None:
        return _merge(_DEFAULTS, doc)
    if parent in seen:
        raise ConfigValidationError([f"extends: preset cycle through {parent!r}"])
    base = _resolve_document(preset_document(parent), seen + (parent,))
    return _merge(base, doc)


def _pmf(section: Any, path: str, problems: list[str]) -> tuple[DiscretePmf | None, int | None]:
    if not isinstance(section, Mapping):
        problems.append(f"{path}: expected an object")
        return None, None
    bound = section.get("bound")
    try:
        if "support" in section or "probs" in section:
            pmf = DiscretePmf(tuple(section.get("support", ())), tuple(section.get("probs", ())))
        elif "uniform" in section:
            lo, hi = section["uniform"]
            if hi < lo:
                raise ConfigError(f"uniform range [{lo}, {hi}] is empty")
            pmf = DiscretePmf.uniform(int(lo), int(hi))
        elif "point" in section:
            pmf = DiscretePmf.point(int(section["point"]))
        else:
            problems.append(f"{path}: give 'support'/'probs', 'uniform' or 'point'")
            return None, bound
    except (ConfigError, TypeError, ValueError) as exc:
        problems.append(f"{path}: {exc}")
        return None, bound
    if bound is not None:
        problems.extend(f"{path}: {p}" for p in pmf.problems(int(bound)) if "bound" in p)
    return pmf, None if bound is None else int(bound)


def _market(section: Mapping[str, Any], problems: list[str]) -> MarketParams | None:
    unit = float(section.get("unit_energy_mwh", 0.1))
    try:
        if "price" in section:
            c = to_micro(section["price"])
        else:
            c = to_micro(float(section.get("price_per_kwh", 0.13)) * unit * 1000.0)
        return MarketParams(c=c, T=int(section.get("horizon", 10)), unit_energy=unit)
    except (ContractViolation, TypeError, ValueError) as exc:
        problems.append(f"market: {exc}")
        return None


def _assigner(section: Mapping[str, Any], problems: list[str]) -> LoadAssignerSpec | None:
    try:
        mode = AssignerMode(section.get("mode", "uniform_random"))
    except ValueError:
        problems.append(
            f"loads.mode: unknown mode {section.get('mode')!r}; choose from "
            + ", ".join(m.value for m in AssignerMode)
        )
        return None
    try:
        lo, hi = section.get("deadline_window", (2, 6))
        b_lo, b_hi = section.get("criticality_range", (0.5, 4.0))
        table = tuple((int(s), to_micro(b)) for s, b in section.get("table", ()))
        return LoadAssignerSpec(
            mode=mode,
            deadline_window=(int(lo), int(hi)),
            criticality_range=(to_micro(b_lo), to_micro(b_hi)),
            table=table,
        )
    except (ConfigError, TypeError, ValueError) as exc:
        problems.append(f"loads: {exc}")
        return None


def _scenario(doc: Mapping[str, Any], seed: int, lam: float, problems: list[str]) -> ScenarioConfig | None:
    before = len(problems)
    params = _market(doc.get("market", {}), problems)
    n_pmf, n_bar = _pmf(doc.get("arrivals"), "arrivals", problems)
    s_pmf, s_bar = _pmf(doc.get("supply"), "supply", problems)
    assigner = _assigner(doc.get("loads", {}), problems)
    if not 0.0 <= lam <= 1.0:
        problems.append(f"experiment.lambda: must lie in [0, 1], got {lam}")
    if len(problems) > before:
        return None
    return ScenarioConfig(params, n_pmf, s_pmf, lam, assigner, seed, n_bar, s_bar)


def _int_override(value: Any, env: str, fallback: int) -> int:
    if value is not None:
        return int(value)
    if os.environ.get(env):
        return int(os.environ[env])
    return fallback


def _check_policies(names: Sequence[str], scenario: ScenarioConfig, where: str, problems: list[str]) -> None:
    for name in names:
        if name == MSIGMA:
            continue
        try:
            p = PolicyId.parse(name)
        except ConfigError as exc:
            problems.append(f"{where}: {exc}")
            continue
        if p.uses_m2_quota:
            m = scenario.moments()
            if m.mu_n < m.mu_s:
                problems.append(
                    f"{where}: {p.value} needs mean arrivals >= mean supply "
                    f"(got {m.mu_n:g} < {m.mu_s:g})"
                )


def parse_config(
    raw: Mapping[str, Any],
    *,
    seed: int | None = None,
    trials: int | None = None,
    policies: Sequence[str] | None = None,
    out: str | Path | None = None,
    mode: str | None = None,
) -> ExperimentSpec:
    """Validate a config document and build the experiment it describes.

    All problems are collected and raised together; nothing is sampled
    before validation succeeds.
    """
    doc = _resolve_document(raw)
    exp = doc.get("experiment", {})
    problems: list[str] = []
    mode = mode or exp.get("mode", "simulate")
    if mode not in MODES:
        problems.append(f"experiment.mode: unknown mode {mode!r}; choose from {', '.join(MODES)}")
    try:
        seed_v = _int_override(seed, SEED_ENV, int(exp.get("seed", DEFAULT_SEED)))
        trials_v = _int_override(trials, TRIALS_ENV, int(exp.get("trials", DEFAULT_TRIALS)))
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError([f"experiment: {exc}"]) from None
    if trials_v < 2:
        problems.append(f"experiment.trials: need at least 2, got {trials_v}")
    lam = float(exp.get("lambda", 1.0))
    scenario = _scenario(doc, seed_v, lam, problems)
    pol_names = tuple(policies) if policies else tuple(exp.get("policies", (MSIGMA, "edf", "mh")))
    grid = tuple(float(x) for x in exp.get("lambda_grid", DEFAULT_LAMBDA_GRID))

    scenarios: list[tuple[str, ScenarioConfig]] = []
    if mode == "table":
        names = exp.get("scenarios", [])
        if not names and scenario is not None:
            _check_policies(pol_names, scenario, "experiment.policies", problems)
            scenarios.append((str(doc.get("name", "experiment")), scenario))
        for i, name in enumerate(names):
            try:
                sub_doc = _resolve_document(preset_document(name))
            except ConfigValidationError as exc:
                problems.extend(f"experiment.scenarios[{i}]: {p}" for p in exc.problems)
                continue
            sub_problems: list[str] = []
            sub = _scenario(sub_doc, seed_v, float(sub_doc["experiment"].get("lambda", 1.0)), sub_problems)
            problems.extend(f"experiment.scenarios[{i}] ({name}): {p}" for p in sub_problems)
            if sub is not None:
                _check_policies(pol_names, sub, f"experiment.scenarios[{i}] ({name})", problems)
                scenarios.append((name, sub))
    elif scenario is not None:
        if mode == "sweep":
            bad = [x for x in grid if not 0.0 <= x <= 1.0]
            if bad:
                problems.append(f"experiment.lambda_grid: values outside [0, 1]: {bad}")
            elif 0.0 not in grid or 1.0 not in grid:
                problems.append("experiment.lambda_grid: must include 0 and 1")
            else:
                for x in grid:
                    _check_policies(pol_names, scenario.with_lambda(x), f"experiment.policies (lambda={x:g})", problems)
        elif mode != "oracle-check":
            _check_policies(pol_names, scenario, "experiment.policies", problems)

    check = OracleCheckSpec(
        instances=int(exp.get("instances", 200)),
        max_loads=int(exp.get("max_loads", 8)),
        max_units=int(exp.get("max_units", 12)),
    )
    if mode == "oracle-check" and (check.max_loads > 8 or check.max_units > 12):
        problems.append("experiment: oracle-check instances are limited to 8 loads and 12 units")
    if problems:
        raise ConfigValidationError(problems)
    return ExperimentSpec(
        name=str(doc.get("name", "experiment")),
        scenario=scenario,
        policies=pol_names,
        trials=trials_v,
        seed=seed_v,
        mode=mode,
        lambda_grid=grid,
        scenarios=tuple(scenarios),
        out=Path(out if out is not None else exp.get("out", "results")),
        workers=int(exp.get("workers", 1)),
        oracle_check=check,
    )


def load_config(path: str | Path, **overrides: Any) -> ExperimentSpec:
    """Load a config file, or a bundled preset when ``path`` names one."""
    p = Path(path)
    if p.is_file():
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigValidationError([f"{p}: not valid JSON ({exc})"]) from None
    elif str(path) in preset_names():
        raw = preset_document(str(path))
    else:
        raise ConfigValidationError([f"{path}: no such file or preset"])
    if not isinstance(raw, Mapping):
        raise ConfigValidationError([f"{path}: top level must be an object"])
    return parse_config(raw, **overrides)


def with_seed(spec: ExperimentSpec, seed: int) -> ExperimentSpec:
    scen = replace(spec.scenario, seed=seed) if spec.scenario is not None else None
    subs = tuple((n, replace(s, seed=seed)) for n, s in spec.scenarios)
    return replace(spec, seed=seed, scenario=scen, scenarios=subs)
