"""Pipeline evaluation under a time budget.

Budgets are integer microsecond ticks internally so that charges add up
exactly; the public surface speaks seconds.  The virtual clock prices a
fold as (sum of component cost factors) x training instances x a fixed
tick rate, which makes whole experiments replayable byte-for-byte on any
machine.  The wall clock measures real elapsed time instead.

Evaluation logs are JSON-lines files, one record per line; that format
is the interchange contract with the meta-knowledge base.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import components as comp
from .configspace import Pipeline
from .datasets import Dataset
from .seeding import rng_for

TICKS_PER_SECOND = 1_000_000
# Virtual ticks charged per unit of (cost factor x training instance).
VIRTUAL_TICKS_PER_COST = 10

STATUS_COMPLETE = "complete"
STATUS_INCOMPLETE = "incomplete"
STATUS_INVALID = "invalid"


class BudgetExhaustedError(RuntimeError):
    """An evaluation was requested after the budget ran out."""


def seconds_to_ticks(seconds: float) -> int:
    return int(round(seconds * TICKS_PER_SECOND))


def ticks_to_seconds(ticks: int) -> float:
    return ticks / TICKS_PER_SECOND


@dataclass
class Budget:
    """Monotone consumable time budget; never exceeds its total."""

    total_ticks: int
    consumed_ticks: int = 0
    overrun: bool = False

    def __post_init__(self) -> None:
        if self.total_ticks < 0:
            raise ValueError("budget total must be non-negative")

    @classmethod
    def from_seconds(cls, seconds: float) -> "Budget":
        return cls(seconds_to_ticks(seconds))

    @property
    def total_seconds(self) -> float:
        return ticks_to_seconds(self.total_ticks)

    @property
    def consumed_seconds(self) -> float:
        return ticks_to_seconds(self.consumed_ticks)

    @property
    def remaining_ticks(self) -> int:
        return self.total_ticks - self.consumed_ticks

    @property
    def exhausted(self) -> bool:
        return self.consumed_ticks >= self.total_ticks

    def charge(self, ticks: int) -> int:
        """Consume up to ``ticks``; returns what was actually charged."""
        if ticks < 0:
            raise ValueError("cannot charge negative time")
        charged = min(ticks, self.remaining_ticks)
        self.consumed_ticks += charged
        if charged < ticks:
            self.overrun = True
        return charged


class VirtualClock:
    """Deterministic cost model; no wall time is consumed."""

    virtual = True

    def fold_cost(self, pipeline: Pipeline, n_train: int) -> int:
        factor = sum(comp.get_spec(c).cost_factor for c in pipeline.components)
        return factor * n_train * VIRTUAL_TICKS_PER_COST


class WallClock:
    """Real elapsed time, floored at one tick per measurement."""

    virtual = False

    def __init__(self) -> None:
        self._t0: float | None = None

    def start(self) -> None:
        self._t0 = time.perf_counter()

    def stop(self) -> int:
        elapsed = time.perf_counter() - self._t0
        self._t0 = None
        return max(1, seconds_to_ticks(elapsed))


@dataclass(frozen=True)
class ValidityResult:
    valid: bool
    reason: str | None = None


def check_validity(pipeline: Pipeline, dataset: Dataset) -> ValidityResult:
    """Static compatibility check; runs no training and never raises."""
    pre_ids = [c.id for c in pipeline.preprocessors]
    seen = set()
    for cid in pre_ids:
        if cid in seen:
            return ValidityResult(False, f"duplicate preprocessor: {cid}")
        seen.add(cid)
    if dataset.has_missing and not comp.get_spec(pipeline.predictor).handles_missing:
        if "impute" not in pre_ids:
            return ValidityResult(
                False, f"{pipeline.predictor.id} cannot handle missing values "
                       "and no imputation precedes it")
    for ref, params in zip(pipeline.components, pipeline.hyperparams):
        if ref.id == "feature_subset":
            k = int(np.floor(params["fraction"] * dataset.n_features))
            if k <= 0:
                return ValidityResult(False, "feature subset keeps 0 features")
    return ValidityResult(True, None)


@dataclass(frozen=True)
class EvaluationRecord:
    dataset: str
    pipeline: Pipeline
    predictor: str
    fold_errors: tuple[float, ...]
    mean_error: float | None
    wall_time: float
    wall_ticks: int
    status: str
    note: str = ""

    def to_json_line(self) -> str:
        payload = {
            "dataset": self.dataset,
            "pipeline": self.pipeline.to_dict(),
            "predictor": self.predictor,
            "fold_errors": list(self.fold_errors),
            "mean_error": self.mean_error,
            "wall_time": self.wall_time,
            "wall_ticks": self.wall_ticks,
            "status": self.status,
            "note": self.note,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "EvaluationRecord":
        d = json.loads(line)
        return cls(
            dataset=d["dataset"],
            pipeline=Pipeline.from_dict(d["pipeline"]),
            predictor=d["predictor"],
            fold_errors=tuple(d["fold_errors"]),
            mean_error=d["mean_error"],
            wall_time=d["wall_time"],
            wall_ticks=d["wall_ticks"],
            status=d["status"],
            note=d.get("note", ""),
        )


def stratified_fold_indices(labels: np.ndarray, n_folds: int,
                            rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle within each class, deal round-robin; sizes differ by <= 1."""
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if n_folds > len(labels):
        raise ValueError("more folds than instances")
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        # rotate the starting fold per class so small classes spread out
        for i, j in enumerate(idx):
            folds[(offset + i) % n_folds].append(int(j))
        offset += len(idx)
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def _run_fold(pipeline: Pipeline, dataset: Dataset, train_idx: np.ndarray,
              valid_idx: np.ndarray, seed: int, fold: int) -> float:
    X_train = dataset.features[train_idx]
    y_train = dataset.labels[train_idx]
    X_valid = dataset.features[valid_idx]
    y_valid = dataset.labels[valid_idx]
    for pos, (ref, params) in enumerate(zip(pipeline.preprocessors,
                                            pipeline.hyperparams)):
        impl = comp.fit_preprocessor(ref, params, X_train,
                                     rng_for(seed, "pre", fold, pos))
        X_train = impl.transform(X_train)
        X_valid = impl.transform(X_valid)
    train_ds = Dataset(dataset.name, X_train, y_train, dataset.classes)
    model = comp.fit(pipeline.predictor, pipeline.hyperparams[-1], train_ds,
                     rng_for(seed, "fit", fold))
    pred = comp.predict(model, X_valid)
    return float(np.mean(pred != y_valid))


def cross_validate(pipeline: Pipeline, dataset: Dataset, folds: int,
                   budget: Budget, seed: int,
                   clock: VirtualClock | WallClock | None = None
                   ) -> EvaluationRecord:
    """Stratified k-fold evaluation charged against ``budget``.

    Raises if the budget is already gone; otherwise always produces a
    record, marked incomplete when the budget dies mid-way and invalid
    when a component rejects the data.
    """
    if budget.exhausted:
        raise BudgetExhaustedError("no budget remains for evaluation")
    clock = clock or VirtualClock()
    fold_idx = stratified_fold_indices(dataset.labels, folds,
                                       rng_for(seed, "folds"))
    all_idx = np.arange(dataset.n_instances)

    fold_errors: list[float] = []
    spent = 0
    status = STATUS_COMPLETE
    note = ""
    for f in range(folds):
        valid_idx = fold_idx[f]
        train_idx = np.setdiff1d(all_idx, valid_idx)
        if clock.virtual:
            cost = clock.fold_cost(pipeline, len(train_idx))
            if budget.remaining_ticks < cost:
                spent += budget.charge(budget.remaining_ticks)
                status = STATUS_INCOMPLETE
                note = f"budget exhausted before fold {f}"
                break
            try:
                err = _run_fold(pipeline, dataset, train_idx, valid_idx, seed, f)
            except comp.InvalidPipelineError as exc:
                spent += budget.charge(cost)
                status = STATUS_INVALID
                note = str(exc)
                break
            spent += budget.charge(cost)
            fold_errors.append(err)
        else:
            if budget.exhausted:
                status = STATUS_INCOMPLETE
                note = f"budget exhausted before fold {f}"
                break
            clock.start()
            try:
                err = _run_fold(pipeline, dataset, train_idx, valid_idx, seed, f)
            except comp.InvalidPipelineError as exc:
                spent += budget.charge(clock.stop())
                status = STATUS_INVALID
                note = str(exc)
                break
            spent += budget.charge(clock.stop())
            fold_errors.append(err)

    if status == STATUS_COMPLETE and len(fold_errors) < folds:
        status = STATUS_INCOMPLETE
    mean_error = (float(np.mean(fold_errors))
                  if status == STATUS_COMPLETE else None)
    return EvaluationRecord(
        dataset=dataset.name,
        pipeline=pipeline,
        predictor=pipeline.predictor.id,
        fold_errors=tuple(fold_errors),
        mean_error=mean_error,
        wall_time=ticks_to_seconds(spent),
        wall_ticks=spent,
        status=status,
        note=note,
    )


def charge_landmarkers(budget: Budget,
                       records: Sequence[EvaluationRecord]) -> Budget:
    """Deduct probe-evaluation time from the main budget, clamped at zero."""
    total = sum(r.wall_ticks for r in records)
    budget.charge(total)
    return budget


def write_records(path: str, records: Iterable[EvaluationRecord],
                  append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8") as fh:
        for r in records:
            fh.write(r.to_json_line() + "\n")


def read_records(path: str) -> Iterator[EvaluationRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield EvaluationRecord.from_json_line(line)
