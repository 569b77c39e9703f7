"""Experiment orchestration: bootstrap, scenario grid, and reporting.

A scenario fixes how the configuration space is prepared for each
dataset (uncut, pre-checked, structure-fixed, or culled to k predictors
chosen globally, by landmark similarity, or by the dataset's own prior
record).  Every (dataset, scenario, repeat) cell is an independent job
with a seed derived from its names, so results do not depend on
execution order or worker count.

Scenario modes using prior knowledge read the meta-knowledge base with
the evaluated dataset's own rows removed; the dataset's-own-record mode
is the exception, since its whole point is remembering that dataset.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from . import components as comp
from .analysis import (AnalysisError, ErrorTable, export_error_table,
                       export_report, family_averages, friedman,
                       hierarchy_report, load_error_table, nemenyi_cd,
                       pairwise_critical, rank_settings)
from .configspace import ConfigTree, Pipeline, build_tree, deactivate_predictors
from .datasets import Dataset, DatasetError, load_csv
from .evaluation import (Budget, VirtualClock, WallClock, cross_validate,
                         write_records)
from .landmarking import SimilarityReport, design_space
from .metabase import MetabaseError, MetaKnowledgeBase
from .optimizer import OptimizerPolicy, RunResult, run
from .seeding import int_seed

MODES = ("baseline", "avatar", "r30", "global", "landmarked", "oracle")
_K_MODES = ("global", "landmarked", "oracle")
_MODE_PREFIX = {"global": "M", "landmarked": "L", "oracle": "O"}


class HarnessError(ValueError):
    """Configuration or orchestration failure."""


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    mode: str
    k: int | None = None
    validity_check: bool | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise HarnessError(f"unknown scenario mode: {self.mode}")
        if not self.name:
            raise HarnessError("scenario needs a name")
        if self.mode in _K_MODES:
            if self.k is None or self.k < 1:
                raise HarnessError(f"{self.name}: mode {self.mode} needs k >= 1")
        elif self.k is not None:
            raise HarnessError(f"{self.name}: mode {self.mode} takes no k")
        derived = self.mode != "baseline"
        if self.validity_check is None:
            object.__setattr__(self, "validity_check", derived)
        elif self.validity_check != derived:
            raise HarnessError(
                f"{self.name}: validity check is off exactly for the baseline")

    def to_dict(self) -> dict:
        return {"name": self.name, "mode": self.mode, "k": self.k}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScenarioSpec":
        return cls(d["name"], d["mode"], d.get("k"))


def default_scenarios(ks: Sequence[int] = (1, 4, 8, 10, 19)
                      ) -> tuple[ScenarioSpec, ...]:
    """The standard grid: three controls plus each culling mode at each k."""
    out = [ScenarioSpec("baseline", "baseline"),
           ScenarioSpec("avatar", "avatar"),
           ScenarioSpec("r30", "r30")]
    for mode in _K_MODES:
        prefix = _MODE_PREFIX[mode]
        for k in ks:
            out.append(ScenarioSpec(f"{prefix}-k{k}", mode, k))
    return tuple(out)


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[str, ...]
    output_dir: str
    budget_seconds: float
    scenarios: tuple[ScenarioSpec, ...] = field(default_factory=default_scenarios)
    repeats: int = 5
    folds: int = 10
    seed: int = 0
    bootstrap_budget_seconds: float | None = None
    metabase_path: str | None = None
    clock: str = "virtual"
    landmarker_count: int = 5
    predictors: tuple[str, ...] | None = None
    max_preprocessors: int = 2
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.datasets:
            raise HarnessError("no datasets configured")
        if self.repeats < 1:
            raise HarnessError("repeats must be at least 1")
        if self.budget_seconds <= 0:
            raise HarnessError("budget must be positive")
        if self.folds < 2:
            raise HarnessError("need at least 2 folds")
        if self.clock not in ("virtual", "wall"):
            raise HarnessError(f"unknown clock: {self.clock}")
        names = [s.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise HarnessError("scenario names must be unique")
        if self.workers < 1:
            raise HarnessError("workers must be at least 1")

    @property
    def resolved_metabase_path(self) -> str:
        return self.metabase_path or os.path.join(self.output_dir,
                                                  "metabase.json")

    @property
    def resolved_bootstrap_budget(self) -> float:
        return (self.budget_seconds if self.bootstrap_budget_seconds is None
                else self.bootstrap_budget_seconds)

    @classmethod
    def from_json(cls, path: str, **overrides) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise HarnessError(f"cannot read config {path}: {exc}") from None
        base_dir = os.path.dirname(os.path.abspath(path))

        def resolve(p: str) -> str:
            return p if os.path.isabs(p) else os.path.join(base_dir, p)

        kwargs: dict = {}
        kwargs["datasets"] = tuple(resolve(p) for p in raw["datasets"])
        kwargs["output_dir"] = resolve(raw["output_dir"])
        kwargs["budget_seconds"] = float(raw["budget_seconds"])
        if "scenarios" in raw:
            kwargs["scenarios"] = tuple(ScenarioSpec.from_dict(s)
                                        for s in raw["scenarios"])
        for key in ("repeats", "folds", "seed", "landmarker_count",
                    "max_preprocessors", "workers"):
            if key in raw:
                kwargs[key] = int(raw[key])
        if "bootstrap_budget_seconds" in raw:
            kwargs["bootstrap_budget_seconds"] = float(
                raw["bootstrap_budget_seconds"])
        if "metabase_path" in raw:
            kwargs["metabase_path"] = resolve(raw["metabase_path"])
        if "clock" in raw:
            kwargs["clock"] = raw["clock"]
        if "predictors" in raw:
            kwargs["predictors"] = tuple(raw["predictors"])
        kwargs.update(overrides)
        return cls(**kwargs)


def make_clock(config: ExperimentConfig):
    return VirtualClock() if config.clock == "virtual" else WallClock()


def build_space(config: ExperimentConfig) -> ConfigTree:
    return build_tree(comp.default_pool(
        list(config.predictors) if config.predictors is not None else None),
        comp.default_template(),
        max_preprocessors=config.max_preprocessors)


def load_config_datasets(config: ExperimentConfig) -> list[Dataset]:
    out = []
    seen = set()
    for path in config.datasets:
        ds = load_csv(path)
        if ds.name in seen:
            raise HarnessError(f"duplicate dataset name: {ds.name}")
        seen.add(ds.name)
        out.append(ds)
    return out


# -- bootstrap ----------------------------------------------------------


@dataclass
class BootstrapResult:
    base: MetaKnowledgeBase
    best_pipelines: dict[str, dict]
    notes: list[str]


def _defaults_sweep(ds: Dataset, pool, budget: Budget,
                    config: ExperimentConfig, clock) -> list:
    """Evaluate every pool predictor once at its default configuration.

    Anchors each knowledge-base cell with a sane reference point before
    search-driven sampling skews the per-predictor averages.  Charged to
    the same budget the search then finishes.
    """
    records = []
    for ref, _ in pool:
        if ref.kind != "predictor" or budget.exhausted:
            continue
        spec = comp.get_spec(ref)
        structure, refs, params = [], [], []
        if ds.has_missing and not spec.handles_missing:
            imp = comp.get_spec("impute")
            structure.append(imp.ref.id)
            refs.append(imp.ref)
            params.append(dict(imp.defaults))
        structure.append(ref.id)
        refs.append(ref)
        params.append(dict(spec.defaults))
        pipeline = Pipeline(tuple(structure), tuple(refs), tuple(params))
        records.append(cross_validate(
            pipeline, ds, config.folds, budget,
            int_seed(config.seed, "bootstrap-defaults", ds.name, ref.id),
            clock))
    return records


def bootstrap_metabase(config: ExperimentConfig) -> BootstrapResult:
    """One full-space pre-checked run per dataset, folded into a fresh base.

    Persists the base, the per-dataset winning pipelines, and the raw
    evaluation logs under the output directory.
    """
    log_dir = os.path.join(config.output_dir, "bootstrap", "logs")
    os.makedirs(log_dir, exist_ok=True)
    base = MetaKnowledgeBase()
    pool = comp.default_pool(list(config.predictors)
                             if config.predictors is not None else None)
    for ref, _ in pool:
        if ref.kind == "predictor":
            base.register_predictor(ref.id)
    best: dict[str, dict] = {}
    notes: list[str] = []
    for path in config.datasets:
        try:
            ds = load_csv(path)
        except DatasetError as exc:
            notes.append(f"skipped {path}: {exc}")
            continue
        tree = build_space(config)
        budget = Budget.from_seconds(config.resolved_bootstrap_budget)
        clock = make_clock(config)
        sweep = _defaults_sweep(ds, pool, budget, config, clock)
        result = run(tree, ds, budget, OptimizerPolicy(),
                     int_seed(config.seed, "bootstrap", ds.name),
                     config.folds, clock)
        log = sweep + list(result.log)
        write_records(os.path.join(log_dir, f"{ds.name}.jsonl"), log)
        base.ingest(log)
        complete = [r for r in log if r.status == "complete"]
        if complete:
            top = min(complete, key=lambda r: r.mean_error)
            best[ds.name] = top.pipeline.to_dict()
        else:
            notes.append(f"{ds.name}: bootstrap produced no complete run")
    base.save(config.resolved_metabase_path)
    with open(os.path.join(config.output_dir, "bootstrap",
                           "best_pipelines.json"), "w",
              encoding="utf-8") as fh:
        json.dump(best, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return BootstrapResult(base, best, notes)


# -- scenario execution -------------------------------------------------


@dataclass
class CellRun:
    dataset: str
    scenario: str
    repeat: int
    result: RunResult | None
    similarity: SimilarityReport | None = None
    landmark_ticks: int = 0
    budget_ticks: int = 0
    note: str = ""

    @property
    def best_error(self) -> float | None:
        if self.result is None or self.result.best is None:
            return None
        return self.result.best.mean_error


def _default_structure_pipeline(entry: Mapping) -> Pipeline:
    """The stored winning structure with every hyperparameter at default."""
    pipe = Pipeline.from_dict(entry, lambda cid: comp.get_spec(cid).schema)
    defaults = tuple(comp.default_assignment(ref) for ref in pipe.components)
    return replace(pipe, hyperparams=defaults)


def execute_cell(config: ExperimentConfig, dataset: Dataset,
                 scenario: ScenarioSpec, repeat: int,
                 base: MetaKnowledgeBase | None,
                 best_pipelines: Mapping[str, Mapping] | None,
                 landmarkers: Sequence[str] | None) -> CellRun:
    seed = int_seed(config.seed, "run", dataset.name, scenario.name, repeat)
    budget = Budget.from_seconds(config.budget_seconds)
    clock = make_clock(config)
    tree = build_space(config)
    cell = CellRun(dataset.name, scenario.name, repeat, None,
                   budget_ticks=budget.total_ticks)
    policy = OptimizerPolicy(validity_check=scenario.validity_check)

    if scenario.mode == "r30":
        entry = (best_pipelines or {}).get(dataset.name)
        if entry is None:
            cell.note = "no bootstrap structure recorded for this dataset"
            return cell
        policy = replace(policy,
                         structure_fixed=_default_structure_pipeline(entry))
    elif scenario.mode == "global":
        view = base.leave_one_out(dataset.name)
        try:
            selection = view.top_k(scenario.k, mode="global")
        except MetabaseError as exc:
            cell.note = f"culling impossible: {exc}"
            return cell
        known = set(tree.predictor_component_ids())
        keep = [p for p in selection.predictors if p in known]
        if not keep:
            cell.note = "no selected predictor exists in this space; uncut"
        else:
            deactivate_predictors(tree, keep)
            if selection.clamped:
                cell.note = "; ".join(selection.notes)
    elif scenario.mode == "oracle":
        if dataset.name not in base.datasets:
            cell.note = ("dataset has no prior record; "
                         "own-record culling impossible")
            return cell
        selection = base.top_k(scenario.k, mode="oracle",
                               dataset=dataset.name)
        known = set(tree.predictor_component_ids())
        keep = [p for p in selection.predictors if p in known]
        if not keep:
            cell.note = "no selected predictor exists in this space; uncut"
        else:
            deactivate_predictors(tree, keep)
            if selection.clamped:
                cell.note = "; ".join(selection.notes)
    elif scenario.mode == "landmarked":
        view = base.leave_one_out(dataset.name)
        tree, report, lm_records = design_space(
            view, tree, dataset, list(landmarkers or ()), scenario.k,
            budget, seed, config.folds, clock)
        cell.similarity = report
        cell.landmark_ticks = sum(r.wall_ticks for r in lm_records)

    cell.result = run(tree, dataset, budget, policy, seed, config.folds,
                      clock)
    return cell


def _cell_job(args) -> tuple[tuple[str, str, int], CellRun]:
    config, dataset, scenario, repeat, base, best, landmarkers = args
    cell = execute_cell(config, dataset, scenario, repeat, base, best,
                        landmarkers)
    return (dataset.name, scenario.name, repeat), cell


@dataclass
class ExperimentResult:
    table: ErrorTable
    cells: list[CellRun]
    notes: list[str]


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute the scenario grid and write the per-cell artifacts.

    A cell's table value is the best complete error across its repeats;
    a cell where every repeat came up empty stays absent.
    """
    datasets = load_config_datasets(config)
    notes: list[str] = []

    needs_base = any(s.mode in _K_MODES for s in config.scenarios)
    base: MetaKnowledgeBase | None = None
    if needs_base:
        path = config.resolved_metabase_path
        if not os.path.exists(path):
            raise HarnessError(
                f"meta scenarios need a meta-knowledge base at {path}; "
                "run the bootstrap first")
        base = MetaKnowledgeBase.load(path)

    best_pipelines: dict[str, dict] | None = None
    if any(s.mode == "r30" for s in config.scenarios):
        candidates = [
            os.path.join(config.output_dir, "bootstrap",
                         "best_pipelines.json"),
            os.path.join(os.path.dirname(config.resolved_metabase_path),
                         "bootstrap", "best_pipelines.json"),
        ]
        for bp_path in candidates:
            if os.path.exists(bp_path):
                with open(bp_path, "r", encoding="utf-8") as fh:
                    best_pipelines = json.load(fh)
                break
        else:
            best_pipelines = {}
            notes.append("no bootstrap winners file; structure-fixed cells "
                         "will be skipped")

    landmarkers: list[str] | None = None
    if any(s.mode == "landmarked" for s in config.scenarios):
        landmarkers = base.fastest_predictors(config.landmarker_count)
        if len(landmarkers) < config.landmarker_count:
            notes.append(f"only {len(landmarkers)} probe predictors have "
                         "recorded timings")

    jobs = [(config, ds, sc, r, base, best_pipelines, landmarkers)
            for ds in datasets
            for sc in config.scenarios
            for r in range(config.repeats)]

    results: dict[tuple[str, str, int], CellRun] = {}
    if config.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(config.workers) as pool:
            for key, cell in pool.map(_cell_job, jobs):
                results[key] = cell
    else:
        for job in jobs:
            key, cell = _cell_job(job)
            results[key] = cell

    run_dir = os.path.join(config.output_dir, "runs")
    os.makedirs(run_dir, exist_ok=True)
    cells: list[CellRun] = []
    table_cells: dict[tuple[str, str], float | None] = {}
    for ds in datasets:
        for sc in config.scenarios:
            values = []
            for r in range(config.repeats):
                cell = results[(ds.name, sc.name, r)]
                cells.append(cell)
                stem = f"{ds.name}__{sc.name}__r{r}"
                if cell.result is not None:
                    write_records(os.path.join(run_dir, f"{stem}.jsonl"),
                                  cell.result.log)
                if cell.similarity is not None:
                    with open(os.path.join(run_dir,
                                           f"{stem}.similarity.json"),
                              "w", encoding="utf-8") as fh:
                        json.dump(cell.similarity.to_dict(), fh,
                                  sort_keys=True, indent=1)
                        fh.write("\n")
                if cell.note:
                    notes.append(f"{ds.name}/{sc.name}/r{r}: {cell.note}")
                if cell.best_error is not None:
                    values.append(cell.best_error)
            table_cells[(sc.name, ds.name)] = min(values) if values else None
            if not values:
                notes.append(f"{ds.name}/{sc.name}: all repeats incomplete; "
                             "cell absent")

    table = ErrorTable(tuple(s.name for s in config.scenarios),
                       tuple(ds.name for ds in datasets), table_cells)
    export_error_table(table, os.path.join(config.output_dir,
                                           "error_table.csv"))
    with open(os.path.join(config.output_dir, "run_notes.json"), "w",
              encoding="utf-8") as fh:
        json.dump(sorted(notes), fh, indent=1)
        fh.write("\n")
    return ExperimentResult(table, cells, notes)


# -- reporting ----------------------------------------------------------


def report(config: ExperimentConfig,
           table: ErrorTable | None = None) -> dict:
    """Rank, test, and export; degrades to a note when shapes fall short."""
    if table is None:
        table = load_error_table(os.path.join(config.output_dir,
                                              "error_table.csv"))
    notes: list[str] = []
    matrix = None
    fr = None
    cd = None
    pairs: list = []
    hierarchy: list = []
    try:
        matrix = rank_settings(table)
    except AnalysisError as exc:
        notes.append(f"ranking not possible: {exc}")
    if matrix is not None:
        if matrix.dropped_datasets:
            notes.append("datasets dropped for absent cells: "
                         + ", ".join(matrix.dropped_datasets))
        try:
            fr = friedman(matrix)
        except AnalysisError as exc:
            notes.append(f"significance test not applicable: {exc}")
        try:
            cd = nemenyi_cd(len(matrix.settings), len(matrix.datasets))
            pairs = pairwise_critical(matrix, cd)
        except AnalysisError as exc:
            notes.append(f"critical difference unavailable: {exc}")
        hierarchy = hierarchy_report(family_averages(matrix))
    return export_report(config.output_dir, table, matrix, fr, cd, pairs,
                         hierarchy, notes)
