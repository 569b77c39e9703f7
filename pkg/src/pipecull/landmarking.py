"""Relative landmarking: match a new dataset to prior experience.

A handful of cheap probe predictors is cross-validated on the new
dataset; the resulting error vector is Pearson-correlated against each
prior dataset's errors on the same probes, and the configuration space
is culled to the matched dataset's top-k predictors.  Probe time is
charged to the same budget the optimizer will spend afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import components as comp
from .configspace import ComponentRef, ConfigTree, Pipeline, deactivate_predictors
from .datasets import Dataset
from .evaluation import (STATUS_COMPLETE, Budget, EvaluationRecord,
                         VirtualClock, WallClock, charge_landmarkers,
                         cross_validate)
from .metabase import MetaKnowledgeBase
from .seeding import int_seed

# A similarity coefficient is only trusted when at least this many probe
# errors are shared between the two vectors.
MIN_COMMON_LANDMARKS = 3


class NoComparablePriorError(RuntimeError):
    """No prior dataset admits a defined similarity coefficient."""


@dataclass(frozen=True)
class LandmarkVector:
    """Probe errors for one dataset; None marks an unmeasured probe."""

    dataset: str
    landmarkers: tuple[str, ...]
    errors: tuple[float | None, ...]

    def __post_init__(self) -> None:
        if len(self.landmarkers) != len(self.errors):
            raise ValueError("landmarker/error length mismatch")


@dataclass(frozen=True)
class SimilarityReport:
    coefficients: dict[str, float | None]
    chosen: str | None
    kept: tuple[str, ...]
    tie_note: str | None = None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "coefficients": dict(self.coefficients),
            "chosen": self.chosen,
            "kept": list(self.kept),
            "tie_note": self.tie_note,
            "notes": list(self.notes),
        }


def _entries(v) -> Sequence[float | None]:
    return v.errors if isinstance(v, LandmarkVector) else v


def pearson(a, b) -> float | None:
    """Pearson correlation over jointly present entries; None if undefined.

    Undefined when fewer than two entries are shared or either side is
    constant on the shared entries.
    """
    ea, eb = _entries(a), _entries(b)
    if len(ea) != len(eb):
        raise ValueError("vectors must align entry-wise")
    pairs = [(x, y) for x, y in zip(ea, eb) if x is not None and y is not None]
    if len(pairs) < 2:
        return None
    xs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    n = len(pairs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        return None
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)


def evaluate_landmarkers(landmarkers: Sequence[str], dataset: Dataset,
                         budget: Budget, seed: int, folds: int = 10,
                         clock: VirtualClock | WallClock | None = None
                         ) -> tuple[LandmarkVector, list[EvaluationRecord],
                                    tuple[str, ...]]:
    """Cross-validate each probe on ``dataset`` and charge ``budget``.

    Per-probe seeds depend only on (seed, probe id), so identical inputs
    reproduce identical vectors regardless of the dataset's name.  Probes
    the budget cannot cover stay absent (None) and are flagged.
    """
    clock = clock or VirtualClock()
    scratch = Budget(budget.remaining_ticks)
    notes: list[str] = []
    errors: list[float | None] = []
    records: list[EvaluationRecord] = []
    for lm in landmarkers:
        spec = comp.get_spec(lm)
        structure: list[str] = []
        comps: list[ComponentRef] = []
        params: list[dict] = []
        if dataset.has_missing and not spec.handles_missing:
            imp = comp.get_spec("impute")
            structure.append("impute")
            comps.append(imp.ref)
            params.append(dict(imp.defaults))
            notes.append(f"{lm}: imputation prepended for missing values")
        structure.append(lm)
        comps.append(spec.ref)
        params.append(dict(spec.defaults))
        pipeline = Pipeline(tuple(structure), tuple(comps), tuple(params))
        if scratch.exhausted:
            errors.append(None)
            notes.append(f"{lm}: skipped, probe budget exhausted")
            continue
        rec = cross_validate(pipeline, dataset, folds, scratch,
                             int_seed(seed, "landmark", lm), clock)
        records.append(rec)
        if rec.status == STATUS_COMPLETE:
            errors.append(rec.mean_error)
        else:
            errors.append(None)
            notes.append(f"{lm}: {rec.status}, no probe error recorded")
    charge_landmarkers(budget, records)
    vector = LandmarkVector(dataset.name, tuple(landmarkers), tuple(errors))
    return vector, records, tuple(notes)


def most_similar(coefficients: Mapping[str, float | None],
                 base: MetaKnowledgeBase | None = None
                 ) -> tuple[str, str | None]:
    """Argmax over defined coefficients.

    Exact ties fall to the dataset with more recorded evaluations, then
    to the lexicographically smaller name; a note describes the tie.
    """
    defined = [(name, c) for name, c in coefficients.items() if c is not None]
    if not defined:
        raise NoComparablePriorError("no prior dataset is comparable")
    best_c = max(c for _, c in defined)
    tied = sorted(name for name, c in defined if c == best_c)
    if len(tied) == 1:
        return tied[0], None
    if base is not None:
        tied.sort(key=lambda name: (-base.evaluation_count(name), name))
    chosen = tied[0]
    note = (f"similarity tie at {best_c:.6g} between {tied}; "
            f"chose {chosen}")
    return chosen, note


def design_space(base: MetaKnowledgeBase, tree: ConfigTree, dataset: Dataset,
                 landmarkers: Sequence[str], k: int, budget: Budget,
                 seed: int, folds: int = 10,
                 clock: VirtualClock | WallClock | None = None
                 ) -> tuple[ConfigTree, SimilarityReport,
                            list[EvaluationRecord]]:
    """Cull ``tree`` to the top-k predictors of the best-matched prior.

    Preprocessor nodes are never deactivated.  When no prior dataset is
    comparable the tree is returned uncut, flagged in the report.  The
    returned tree is a copy; the input tree is left untouched.
    """
    vector, records, notes_in = evaluate_landmarkers(
        landmarkers, dataset, budget, seed, folds, clock)
    notes = list(notes_in)

    coefficients: dict[str, float | None] = {}
    for prior in base.datasets:
        if prior == dataset.name:
            continue
        prior_vec = base.landmark_errors(prior, landmarkers)
        common = sum(1 for a, b in zip(vector.errors, prior_vec)
                     if a is not None and b is not None)
        if common < MIN_COMMON_LANDMARKS:
            coefficients[prior] = None
            continue
        coefficients[prior] = pearson(vector.errors, prior_vec)

    culled = tree.copy()
    try:
        chosen, tie_note = most_similar(coefficients, base)
    except NoComparablePriorError:
        notes.append("no comparable prior dataset; space left uncut")
        report = SimilarityReport(coefficients, None,
                                  tuple(tree.predictor_component_ids()),
                                  None, tuple(notes))
        return culled, report, records

    selection = base.top_k(k, mode="oracle", dataset=chosen)
    notes.extend(selection.notes)
    keep = [p for p in selection.predictors
            if p in set(culled.predictor_component_ids())]
    dropped = [p for p in selection.predictors if p not in set(keep)]
    if dropped:
        notes.append(f"matched predictors not in this space: {dropped}")
    if not keep:
        notes.append("no matched predictor exists in this space; left uncut")
        report = SimilarityReport(coefficients, chosen,
                                  tuple(tree.predictor_component_ids()),
                                  tie_note, tuple(notes))
        return culled, report, records

    deactivate_predictors(culled, keep)
    report = SimilarityReport(coefficients, chosen, tuple(keep), tie_note,
                              tuple(notes))
    return culled, report, records
