"""Seeded Monte Carlo sweeps, CSV output and INI configuration."""

from __future__ import annotations

import configparser
import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .baselines import ALL_SCHEMES, Scheme, run_scheme
from .errors import ConfigError, InvalidInput, IoError, SwanError
from .geometry import Scenario, SwanLayout, dbm_to_watts
from .metrics import evaluate
from .solver import SolverConfig

CSV_HEADER = ("scheme", "axis", "value", "trial", "seed", "crlb", "crlb_db", "min_rate", "feasible",
              "outer_iters", "inner_iters", "wall_ms")

# Sweep axes and the template field each one overrides.
AXES = {
    "power": "power_dbm",
    "gamma": "rate_threshold",
    "kc": "num_cus",
    "dx": "area_x",
    "m": "num_segments",
    "nu": "position_error",
}

_CU_STREAM, _TARGET_STREAM, _ERROR_STREAM = 0, 1, 2


@dataclass(frozen=True)
class Template:
    """Everything needed to build a layout and draw a scenario; defaults are the full-scale setup."""

    num_segments: int = 10
    tpas_per_segment: int = 4
    area_x: float = 60.0
    area_y: float = 40.0
    height: float = 3.0
    carrier_freq: float = 28e9
    effective_index: float = 1.4
    attenuation: float = 0.08
    num_cus: int = 6
    num_targets: int = 4
    power_dbm: float = 24.0
    rate_threshold: float = 6.0
    noise_comm_dbm: float = -90.0
    noise_sense_dbm: float = -80.0
    samples: int = 1024
    position_error: float = 0.0

    @classmethod
    def desk_scale(cls, **changes) -> "Template":
        return replace(cls(num_segments=4, tpas_per_segment=2, num_cus=2, num_targets=2, rate_threshold=4.0),
                       **changes)

    def layout(self) -> SwanLayout:
        return SwanLayout.for_area(int(self.num_segments), int(self.tpas_per_segment), self.area_x,
                                   height=self.height, area_y=self.area_y, carrier_freq=self.carrier_freq,
                                   effective_index=self.effective_index, attenuation=self.attenuation)

    def with_axis(self, axis: str, value: float) -> "Template":
        name = AXES[axis]
        if name in ("num_cus", "num_segments"):
            if value != int(value):
                raise InvalidInput(f"axis {axis} needs integer values, got {value}")
            value = int(value)
        return replace(self, **{name: value})


def trial_seed_sequence(master_seed: int, trial: int, stream: int = None) -> np.random.SeedSequence:
    key = (trial,) if stream is None else (trial, stream)
    return np.random.SeedSequence(master_seed, spawn_key=key)


def trial_seed(master_seed: int, trial: int) -> int:
    """The 64-bit seed recorded for a trial."""
    return int(trial_seed_sequence(master_seed, trial).generate_state(1, np.uint64)[0])


def _draw_points(seq: np.random.SeedSequence, count: int, template: Template) -> np.ndarray:
    # one row per point, so the first k rows do not depend on ``count``
    u = np.random.default_rng(seq).random((count, 2))
    return np.column_stack([u[:, 0] * template.area_x, (u[:, 1] - 0.5) * template.area_y])


def generate_scenario(template: Template, seed: int, trial: int = 0) -> Scenario:
    """Draw CU and target positions uniformly over the service area.

    ``seed`` is the master seed; each trial and each kind of draw gets its own
    substream, so adding CUs or trials never changes earlier draws.
    """
    cu = _draw_points(trial_seed_sequence(seed, trial, _CU_STREAM), template.num_cus, template)
    tg = _draw_points(trial_seed_sequence(seed, trial, _TARGET_STREAM), template.num_targets, template)
    return Scenario(
        cu_positions=cu, target_positions=tg,
        noise_comm=float(dbm_to_watts(template.noise_comm_dbm)),
        noise_sense=float(dbm_to_watts(template.noise_sense_dbm)),
        power_budget=float(dbm_to_watts(template.power_dbm)),
        rate_thresholds=template.rate_threshold, samples=int(template.samples),
        position_error=template.position_error,
    )


def true_target_positions(scenario: Scenario, seed: int, trial: int = 0) -> np.ndarray:
    """Assumed target positions plus a uniform error in ``[-nu/2, nu/2]`` on each coordinate."""
    nu = scenario.position_error
    u = np.random.default_rng(trial_seed_sequence(seed, trial, _ERROR_STREAM)).random(scenario.target_positions.shape)
    return scenario.target_positions + nu * (u - 0.5)


@dataclass(frozen=True)
class ExperimentPlan:
    axis: str = "power"
    values: tuple = (16.0, 20.0, 24.0)
    schemes: tuple = tuple(s.value for s in ALL_SCHEMES)
    trials: int = 32
    seed: int = 0
    template: Template = field(default_factory=Template.desk_scale)
    solver: SolverConfig = field(default_factory=SolverConfig)
    record_timing: bool = False

    def __post_init__(self):
        if self.axis not in AXES:
            raise InvalidInput(f"unknown axis {self.axis!r}; expected one of {sorted(AXES)}")
        values = tuple(float(v) for v in self.values)
        if not values or any(b <= a for a, b in zip(values, values[1:])):
            raise InvalidInput("axis values must be nonempty and strictly increasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "schemes", tuple(Scheme.parse(s).value for s in self.schemes))
        if int(self.trials) != self.trials or self.trials < 1:
            raise InvalidInput("trials must be a positive integer")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise InvalidInput("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class TrialRecord:
    scheme: str
    axis: str
    value: float
    trial: int
    seed: int
    crlb: float
    crlb_db: float
    min_rate: float
    feasible: bool
    outer_iters: int
    inner_iters: int
    wall_ms: float

    @property
    def sort_key(self):
        return (self.scheme, self.axis, self.value, self.trial)


def _failed(plan, scheme, value, trial, seed, wall_ms) -> TrialRecord:
    return TrialRecord(scheme, plan.axis, value, trial, seed, math.inf, math.inf, math.nan, False, 0, 0,
                       wall_ms if plan.record_timing else 0.0)


def _run_task(plan: ExperimentPlan, scheme: str, trial: int) -> list:
    """All axis values of one (scheme, trial) pair."""
    seed = trial_seed(plan.seed, trial)
    out = []
    if plan.axis == "nu":
        # one design at the assumed positions, scored at each error level
        t0 = time.perf_counter()
        try:
            tmpl = plan.template
            layout = tmpl.layout()
            scenario = generate_scenario(tmpl, plan.seed, trial)
            result = run_scheme(layout, scenario, scheme, plan.solver)
        except (SwanError, ArithmeticError, ValueError):
            result = None
        solve_ms = (time.perf_counter() - t0) * 1e3
        for value in plan.values:
            t1 = time.perf_counter()
            if result is None:
                out.append(_failed(plan, scheme, value, trial, seed, solve_ms))
                continue
            truth = true_target_positions(scenario.with_(position_error=value), plan.seed, trial)
            report = evaluate(layout, scenario, result.point, result.array, targets=truth)
            ms = solve_ms + (time.perf_counter() - t1) * 1e3
            out.append(_record(plan, scheme, value, trial, seed, report, result, ms))
        return out
    for value in plan.values:
        t0 = time.perf_counter()
        try:
            tmpl = plan.template.with_axis(plan.axis, value)
            layout = tmpl.layout()
            scenario = generate_scenario(tmpl, plan.seed, trial)
            result = run_scheme(layout, scenario, scheme, plan.solver)
        except (SwanError, ArithmeticError, ValueError):
            out.append(_failed(plan, scheme, value, trial, seed, (time.perf_counter() - t0) * 1e3))
            continue
        out.append(_record(plan, scheme, value, trial, seed, result.report, result,
                           (time.perf_counter() - t0) * 1e3))
    return out


def _record(plan, scheme, value, trial, seed, report, result, ms) -> TrialRecord:
    return TrialRecord(scheme, plan.axis, value, trial, seed, float(report.crlb), float(report.crlb_db),
                       report.min_rate, bool(result.feasible), result.outer_iters, result.inner_iters_total,
                       ms if plan.record_timing else 0.0)


def worker_count() -> int:
    env = os.environ.get("SWAN_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"SWAN_THREADS must be a positive integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError(f"SWAN_THREADS must be a positive integer, got {env!r}")
        return n
    if hasattr(os, "sched_getaffinity"):
        return len(os.sched_getaffinity(0)) or 1
    return os.cpu_count() or 1


def run_plan(plan: ExperimentPlan, workers: int = None, order=None) -> list:
    """Run every (scheme, axis value, trial) combination; rows come back sorted.

    ``order`` optionally permutes the task list (used to show that execution
    order does not matter).
    """
    tasks = [(s, t) for s in plan.schemes for t in range(plan.trials)]
    if order is not None:
        tasks = [tasks[i] for i in order]
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        chunks = [_run_task(plan, s, t) for s, t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_task, plan, s, t) for s, t in tasks]
            chunks = [f.result() for f in futures]
    records = [r for chunk in chunks for r in chunk]
    return sorted(records, key=lambda r: r.sort_key)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".9g")


def emit_csv(records, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in records:
                w.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
    except OSError as exc:
        raise IoError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path) -> list:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IoError(f"cannot read CSV from {path}: {exc}") from exc
    return [TrialRecord(r["scheme"], r["axis"], float(r["value"]), int(r["trial"]), int(r["seed"]),
                        float(r["crlb"]), float(r["crlb_db"]), float(r["min_rate"]), r["feasible"] == "1",
                        int(r["outer_iters"]), int(r["inner_iters"]), float(r["wall_ms"])) for r in rows]


@dataclass(frozen=True)
class Summary:
    scheme: str
    value: float
    mean_crlb_db: float
    feasible: int
    infeasible: int


def aggregate(records) -> dict:
    """Mean ``crlb_db`` over feasible trials, keyed by ``(scheme, value)``."""
    groups = {}
    for r in records:
        groups.setdefault((r.scheme, r.value), []).append(r)
    out = {}
    for key, rows in sorted(groups.items()):
        good = [r.crlb_db for r in rows if r.feasible and math.isfinite(r.crlb_db)]
        mean = float(np.mean(good)) if good else math.nan
        out[key] = Summary(key[0], key[1], mean, len(good), len(rows) - len(good))
    return out


# --------------------------------------------------------------------------
# INI configuration
# --------------------------------------------------------------------------

_LAYOUT_KEYS = ("num_segments", "tpas_per_segment", "area_x", "area_y", "height", "carrier_freq",
                "effective_index", "attenuation")
_SCENARIO_KEYS = ("num_cus", "num_targets", "power_dbm", "rate_threshold", "noise_comm_dbm",
                  "noise_sense_dbm", "samples", "position_error")
_EXPERIMENT_KEYS = ("axis", "values", "schemes", "trials", "seed", "record_timing")


def _convert(raw: str, default, key: str):
    try:
        if isinstance(default, bool):
            return {"true": True, "false": False, "1": True, "0": False}[raw.strip().lower()]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw.strip()


def _section(parser, name: str, keys, defaults) -> dict:
    if not parser.has_section(name):
        return {}
    out = {}
    for key, raw in parser.items(name):
        if key not in keys:
            raise ConfigError(f"unknown key {key!r} in section [{name}]")
        out[key] = _convert(raw, getattr(defaults, key), f"{name}.{key}")
    return out


def load_config(path, base: ExperimentPlan = None) -> ExperimentPlan:
    """Read an INI file with sections [layout], [scenario], [solver] and [experiment]."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    unknown = set(parser.sections()) - {"layout", "scenario", "solver", "experiment"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    base = base or ExperimentPlan()
    tmpl = replace(base.template, **_section(parser, "layout", _LAYOUT_KEYS, base.template),
                   **_section(parser, "scenario", _SCENARIO_KEYS, base.template))
    solver_keys = tuple(f.name for f in fields(SolverConfig))
    try:
        solver = replace(base.solver, **_section(parser, "solver", solver_keys, base.solver))
        exp = _section(parser, "experiment", _EXPERIMENT_KEYS, _ExpDefaults(base))
        if "values" in exp:
            exp["values"] = tuple(float(v) for v in exp["values"].split(","))
        if "schemes" in exp:
            exp["schemes"] = tuple(s.strip() for s in exp["schemes"].split(",") if s.strip())
        return replace(base, template=tmpl, solver=solver, **exp)
    except InvalidInput as exc:
        raise ConfigError(str(exc)) from exc


class _ExpDefaults:
    """String-typed view of the list-valued experiment fields for ``_convert``."""

    def __init__(self, plan: ExperimentPlan):
        self._plan = plan

    def __getattr__(self, name):
        if name in ("values", "schemes"):
            return ""
        return getattr(self._plan, name)


def write_config(path, plan: ExperimentPlan) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    t = plan.template
    parser["layout"] = {k: repr(getattr(t, k)) for k in _LAYOUT_KEYS}
    parser["scenario"] = {k: repr(getattr(t, k)) for k in _SCENARIO_KEYS}
    parser["solver"] = {f.name: repr(getattr(plan.solver, f.name)) for f in fields(SolverConfig)}
    parser["experiment"] = {
        "axis": plan.axis,
        "values": ",".join(_fmt(v) for v in plan.values),
        "schemes": ",".join(plan.schemes),
        "trials": str(plan.trials),
        "seed": str(plan.seed),
        "record_timing": str(plan.record_timing).lower(),
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            parser.write(fh)
    except OSError as exc:
        raise IoError(f"cannot write config {path}: {exc}") from exc
