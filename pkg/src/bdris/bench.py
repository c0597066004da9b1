"""Experiment harness: seeded runs, sweeps, CSV/JSON emission, architecture comparison."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .channel import RNG_ALGORITHM, ScenarioConfig, build_scenario
from .powermin import PowerMinParams, solve_powermin
from .ris import index_sets, make_architecture
from .sumrate import SumRateParams, solve_sumrate

CSV_HEADER = ("axis", "seed", "objective", "objective_alt_units", "iters",
              "residual", "time_ms", "status", "margin")
SUMMARY_HEADER = ("axis", "n", "objective_mean", "objective_std",
                  "objective_alt_mean", "time_ms_mean")
SWEEP_VARIABLES = ("m", "p_t_dbm", "gamma_db", "mask_kind")
MODES = ("sumrate", "powermin")


@dataclass
class SweepSpec:
    variable: str
    values: list

    def validate(self) -> None:
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep.variable must be one of {SWEEP_VARIABLES}")
        if not self.values:
            raise ValueError("sweep.values must be non-empty")


@dataclass
class ExperimentSpec:
    """One experiment: solver mode, base scenario, optional sweep, seeds."""

    mode: str
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    params: dict = field(default_factory=dict)
    sweep: SweepSpec | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    output_path: str | None = None

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        self.scenario.validate()
        if self.sweep is not None:
            self.sweep.validate()
            for v in self.sweep.values:
                self._apply_axis(v).validate()

    def _apply_axis(self, value) -> ScenarioConfig:
        if self.sweep is None:
            return self.scenario
        if self.sweep.variable == "mask_kind":
            kind, gs = parse_mask_label(str(value), self.scenario.group_size)
            return dataclasses.replace(self.scenario, mask_kind=kind,
                                       group_size=gs)
        return dataclasses.replace(self.scenario,
                                   **{self.sweep.variable: value})

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        doc = dict(doc)
        if "scenario" in doc:
            doc["scenario"] = ScenarioConfig.from_dict(doc["scenario"])
        if doc.get("sweep") is not None:
            doc["sweep"] = SweepSpec(**doc["sweep"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class ResultRow:
    """One solver run: one row per (axis value, seed)."""

    axis: object
    seed: int
    objective: float
    objective_alt: float
    iters: int
    residual: float
    time_ms: float
    status: str
    margin: float | None


@dataclass
class SummaryRow:
    axis: object
    n: int
    objective_mean: float
    objective_std: float
    objective_alt_mean: float
    time_ms_mean: float


@dataclass
class RunResult:
    rows: list[ResultRow]
    summary: list[SummaryRow]
    provenance: dict

    @property
    def any_infeasible(self) -> bool:
        return any(r.status == "infeasible_solution" for r in self.rows)


def parse_mask_label(label: str, default_group_size: int | None = None):
    """Mask labels for sweeps and the compare command: ``single``, ``fully``,
    ``tree_tridiagonal``, ``group`` (uses the scenario group size),
    ``group:4`` or ``group(4)``."""
    label = label.strip()
    if label.startswith("group") and label not in ("group",):
        size = label[5:].strip(":()")
        return "group", int(size)
    if label == "group":
        if default_group_size is None:
            raise ValueError("group label needs an explicit size, e.g. group:4")
        return "group", default_group_size
    return label, None


def build_params(mode: str, overrides: dict):
    cls = SumRateParams if mode == "sumrate" else PowerMinParams
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown {mode} parameters: {sorted(unknown)}")
    return cls(**overrides)


def _solve_cell(mode: str, cfg: ScenarioConfig, params) -> tuple:
    scenario = build_scenario(cfg)
    t0 = time.perf_counter()
    if mode == "sumrate":
        rep = solve_sumrate(scenario, params)
    else:
        rep = solve_powermin(scenario, params)
    elapsed_ms = 1e3 * (time.perf_counter() - t0)
    return rep, elapsed_ms


def _run_cell(args) -> tuple:
    """Process-pool entry point: one (axis value, seed) cell."""
    order, mode, axis, cfg, params = args
    rep, ms = _solve_cell(mode, cfg, params)
    return order, _to_row(mode, axis, cfg.seed, rep, ms)


def _to_row(mode: str, axis, seed: int, rep, elapsed_ms: float) -> ResultRow:
    if mode == "sumrate":
        obj = rep.objective                       # nats
        alt = obj / math.log(2.0)                 # bits/s/Hz
        residual = rep.history["residual_rel"][-1]
        margin = None
    else:
        obj = rep.objective                       # watts
        alt = 10.0 * math.log10(max(obj, 1e-300)) + 30.0   # dBm
        residual = max(rep.history["residual_bilinear_rel"][-1],
                       rep.history["residual_coupling_rel"][-1])
        margin = rep.diagnostics["qos_margin"]
    return ResultRow(axis=axis, seed=seed, objective=obj, objective_alt=alt,
                     iters=rep.iterations, residual=residual,
                     time_ms=elapsed_ms, status=rep.status, margin=margin)


def _worker_count(n_cells: int) -> int:
    env = os.environ.get("BDRIS_THREADS", "")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_cells))


def run(spec: ExperimentSpec) -> RunResult:
    """Execute every (axis value, seed) cell and gather rows plus summaries.

    Cells run in a thread pool capped by the ``BDRIS_THREADS`` environment
    variable; rows are sorted by (axis, seed) before writing so output is
    deterministic regardless of scheduling.  When ``output_path`` is set,
    writes the row CSV, a ``.summary.csv`` sibling, and a provenance JSON
    with the fully resolved spec and the pinned RNG algorithm.
    """
    spec.validate()
    axis_values = spec.sweep.values if spec.sweep else [""]
    params = build_params(spec.mode, spec.params)
    cells = [(ai, spec.mode, axis,
              dataclasses.replace(spec._apply_axis(axis), seed=seed), params)
             for ai, axis in enumerate(axis_values) for seed in spec.seeds]

    workers = _worker_count(len(cells))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    results.sort(key=lambda t: (t[0], t[1].seed))
    rows = [r for _, r in results]

    summary = []
    for ai, axis in enumerate(axis_values):
        grp = [r for i, r in results if i == ai]
        objs = np.array([r.objective for r in grp])
        alts = np.array([r.objective_alt for r in grp])
        times = np.array([r.time_ms for r in grp])
        summary.append(SummaryRow(
            axis=axis, n=len(grp), objective_mean=float(objs.mean()),
            objective_std=float(objs.std(ddof=1)) if len(grp) > 1 else 0.0,
            objective_alt_mean=float(alts.mean()),
            time_ms_mean=float(times.mean())))

    provenance = {
        "spec": spec.to_dict(),
        "rng_algorithm": RNG_ALGORITHM,
        "versions": {"bdris": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__},
    }
    result = RunResult(rows=rows, summary=summary, provenance=provenance)
    if spec.output_path:
        write_outputs(result, spec.output_path)
    return result


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)  # shortest round-trip decimal
    return str(value)


def write_outputs(result: RunResult, output_path: str) -> None:
    out = Path(output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in result.rows:
            writer.writerow([_fmt(r.axis), r.seed, _fmt(r.objective),
                             _fmt(r.objective_alt), r.iters, _fmt(r.residual),
                             _fmt(r.time_ms), r.status, _fmt(r.margin)])
    with out.with_suffix(out.suffix + ".summary.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for s in result.summary:
            writer.writerow([_fmt(s.axis), s.n, _fmt(s.objective_mean),
                             _fmt(s.objective_std), _fmt(s.objective_alt_mean),
                             _fmt(s.time_ms_mean)])
    with out.with_suffix(out.suffix + ".provenance.json").open("w") as fh:
        json.dump(result.provenance, fh, indent=2)


@dataclass
class MaskComparison:
    label: str
    n_parameters: int
    objective_mean: float
    objective_std: float
    rows: list[ResultRow]


@dataclass
class PairedComparison:
    first: str
    second: str
    first_wins: int
    second_wins: int
    ties: int
    mean_difference: float   # first minus second, in objective units


@dataclass
class ComparisonSummary:
    mode: str
    ranked: list[MaskComparison]   # best objective first
    pairs: list[PairedComparison]

    @property
    def any_infeasible(self) -> bool:
        return any(r.status == "infeasible_solution"
                   for m in self.ranked for r in m.rows)


def compare_architectures(base_spec: ExperimentSpec,
                          masks: list[str]) -> ComparisonSummary:
    """Run the same seeds under each architecture mask and rank the means.

    Pairwise sign counts over the shared seeds accompany the ranking; the
    free-parameter count of each mask is reported so performance can be read
    against circuit complexity.
    """
    if base_spec.sweep is not None:
        raise ValueError("architecture comparison uses a sweep-free base spec")
    if not masks:
        raise ValueError("at least one mask label is required")
    per_mask: list[MaskComparison] = []
    for label in masks:
        kind, gs = parse_mask_label(label, base_spec.scenario.group_size)
        scenario = dataclasses.replace(base_spec.scenario, mask_kind=kind,
                                       group_size=gs)
        spec = dataclasses.replace(base_spec, scenario=scenario,
                                   output_path=None)
        rows = run(spec).rows
        objs = np.array([r.objective for r in rows])
        mask = make_architecture(kind, scenario.m, gs)
        per_mask.append(MaskComparison(
            label=label, n_parameters=index_sets(mask).total,
            objective_mean=float(objs.mean()),
            objective_std=float(objs.std(ddof=1)) if len(rows) > 1 else 0.0,
            rows=rows))

    higher_is_better = base_spec.mode == "sumrate"
    pairs = []
    for i in range(len(per_mask)):
        for j in range(i + 1, len(per_mask)):
            a, b = per_mask[i], per_mask[j]
            diffs = np.array([ra.objective - rb.objective
                              for ra, rb in zip(a.rows, b.rows)])
            better = diffs > 0 if higher_is_better else diffs < 0
            worse = diffs < 0 if higher_is_better else diffs > 0
            pairs.append(PairedComparison(
                first=a.label, second=b.label,
                first_wins=int(better.sum()), second_wins=int(worse.sum()),
                ties=int((diffs == 0).sum()),
                mean_difference=float(diffs.mean())))
    ranked = sorted(per_mask, key=lambda m: m.objective_mean,
                    reverse=higher_is_better)
    return ComparisonSummary(mode=base_spec.mode, ranked=ranked, pairs=pairs)
