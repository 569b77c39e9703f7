"""Budgeted sequential search over the active configuration space.

Candidate generation mixes exploration with exploitation (perturbing one
hyperparameter of a random incumbent).  Exploration first anchors each
active structure once at its default hyperparameters, then falls back to
uniform sampling of the active space.  An optional static validity
pre-check skips doomed candidates at zero cost; with it off, invalid
pipelines are discovered the expensive way, by failing during their
first fold.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import AbstractSet, Sequence

import numpy as np

from . import components as comp
from .configspace import (ConfigSpaceError, ConfigTree, Continuous,
                          Categorical, Integer, Pipeline,
                          enumerate_structures, sample_pipeline)
from .datasets import Dataset
from .evaluation import (STATUS_COMPLETE, Budget, EvaluationRecord,
                         VirtualClock, WallClock, check_validity,
                         cross_validate)
from .seeding import rng_for

# Runs where every proposal fails the pre-check must still terminate.
MAX_CONSECUTIVE_SKIPS = 1000


@dataclass(frozen=True)
class OptimizerPolicy:
    explore_probability: float = 0.3
    incumbent_count: int = 5
    perturb_fraction: float = 0.10
    perturb_step: int = 1
    validity_check: bool = True
    structure_fixed: Pipeline | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.explore_probability <= 1.0:
            raise ValueError("explore_probability must be in [0, 1]")
        if self.incumbent_count < 1:
            raise ValueError("incumbent_count must be positive")


@dataclass
class RunResult:
    best: EvaluationRecord | None
    log: tuple[EvaluationRecord, ...]
    status: str
    n_skipped_invalid: int = 0
    consumed_ticks: int = 0
    notes: tuple[str, ...] = ()


def _perturb_value(domain, value, policy: OptimizerPolicy,
                   rng: np.random.Generator):
    if isinstance(domain, Continuous):
        span = domain.hi - domain.lo
        if span <= 0:
            return value
        delta = rng.uniform(-policy.perturb_fraction, policy.perturb_fraction)
        return float(np.clip(value + delta * span, domain.lo, domain.hi))
    if isinstance(domain, Integer):
        step = int(rng.choice([-policy.perturb_step, policy.perturb_step]))
        return int(np.clip(value + step, domain.lo, domain.hi))
    if isinstance(domain, Categorical):
        return domain.sample(rng)
    raise TypeError(f"unknown domain type: {type(domain)!r}")


def propose_exploit(incumbents: Sequence[EvaluationRecord],
                    policy: OptimizerPolicy,
                    rng: np.random.Generator) -> Pipeline:
    """Perturb exactly one hyperparameter of a random incumbent.

    A pipeline with no hyperparameters comes back unchanged.  Conditional
    hyperparameters are reconciled after the perturbation, so the result
    always satisfies its schemas.
    """
    rec = incumbents[int(rng.integers(len(incumbents)))]
    pipe = rec.pipeline
    slots = [(i, name) for i, params in enumerate(pipe.hyperparams)
             for name in params]
    if not slots:
        return pipe
    pos, name = slots[int(rng.integers(len(slots)))]
    schema = pipe.schemas[pos]
    if schema is None:
        schema = comp.get_spec(pipe.components[pos]).schema
    new_params = [dict(p) for p in pipe.hyperparams]
    entry = schema.entry(name)
    new_params[pos][name] = _perturb_value(entry.domain, new_params[pos][name],
                                           policy, rng)
    new_params[pos] = schema.reconcile(new_params[pos], rng)
    return replace(pipe, hyperparams=tuple(new_params))


def _structure_default(tree: ConfigTree, structure: tuple[str, ...],
                       rng: np.random.Generator) -> Pipeline:
    comps = tuple(tree.nodes[nid].component for nid in structure)
    schemas = tuple(tree.nodes[nid].schema for nid in structure)
    params = []
    for ref, schema in zip(comps, schemas):
        assignment = comp.default_assignment(ref)
        try:
            schema.validate_assignment(assignment)
        except ConfigSpaceError:
            # A narrowed domain can exclude the registry default.
            assignment = schema.sample(rng)
        params.append(assignment)
    return Pipeline(structure, comps, tuple(params), schemas)


def propose_explore(tree: ConfigTree, rng: np.random.Generator,
                    tried: AbstractSet[tuple[str, ...]] = frozenset()
                    ) -> Pipeline:
    """Anchor an untried structure at its defaults, else sample uniformly.

    While any active structure is absent from ``tried``, exploration picks
    one of those (uniformly) at default hyperparameters, so every live
    path gets at least one fair look before random search takes over.
    """
    fresh = [s for s in enumerate_structures(tree) if s not in tried]
    if fresh:
        return _structure_default(tree, fresh[int(rng.integers(len(fresh)))],
                                  rng)
    return sample_pipeline(tree, rng)


def _resample_fixed(fixed: Pipeline, rng: np.random.Generator) -> Pipeline:
    params = []
    for ref, schema in zip(fixed.components, fixed.schemas):
        if schema is None:
            schema = comp.get_spec(ref).schema
        params.append(schema.sample(rng))
    return replace(fixed, hyperparams=tuple(params))


def run(tree: ConfigTree, dataset: Dataset, budget: Budget,
        policy: OptimizerPolicy, seed: int, folds: int = 10,
        clock: VirtualClock | WallClock | None = None,
        max_evaluations: int | None = None) -> RunResult:
    """Search until the budget (or evaluation cap) is exhausted.

    The best record is the completed evaluation with the lowest mean
    error, earliest evaluation winning ties.  With a fixed structure the
    first candidate is that structure at its stored hyperparameters and
    only hyperparameters vary afterwards.
    """
    clock = clock or VirtualClock()
    rng = rng_for(seed, "optimizer")
    log: list[EvaluationRecord] = []
    incumbents: list[tuple[float, int, EvaluationRecord]] = []
    notes: list[str] = []
    n_skipped = 0
    consecutive_skips = 0
    start_ticks = budget.consumed_ticks
    first = True

    if policy.structure_fixed is None and not tree.active_predictor_leaves():
        return RunResult(None, (), "incomplete", 0, 0,
                         ("no active pipeline path to search",))

    # Marked at proposal time, so a structure whose anchor fails the
    # validity pre-check is not re-anchored forever.
    tried_structures: set[tuple[str, ...]] = set()

    def _propose(explore: bool) -> Pipeline:
        if policy.structure_fixed is not None:
            if explore:
                cand = _resample_fixed(policy.structure_fixed, rng)
            else:
                cand = propose_exploit([r for _, _, r in incumbents],
                                       policy, rng)
        elif explore:
            cand = propose_explore(tree, rng, tried_structures)
        else:
            cand = propose_exploit([r for _, _, r in incumbents], policy, rng)
        tried_structures.add(cand.structure)
        return cand

    while not budget.exhausted:
        if max_evaluations is not None and len(log) >= max_evaluations:
            break
        explore = not incumbents or rng.random() < policy.explore_probability
        if first and policy.structure_fixed is not None:
            candidate = policy.structure_fixed
        else:
            candidate = _propose(explore)
        first = False

        if policy.validity_check:
            # A skipped proposal costs nothing, so the chosen arm keeps
            # drawing until it lands on an evaluable pipeline; the cap
            # stops runs whose reachable space is entirely invalid.
            aborted = False
            while True:
                verdict = check_validity(candidate, dataset)
                if verdict.valid:
                    break
                n_skipped += 1
                consecutive_skips += 1
                if consecutive_skips >= MAX_CONSECUTIVE_SKIPS:
                    notes.append(
                        f"stopped after {consecutive_skips} consecutive "
                        "invalid proposals")
                    aborted = True
                    break
                candidate = _propose(explore)
            if aborted:
                break
        consecutive_skips = 0

        rec = cross_validate(candidate, dataset, folds, budget,
                             int(rng.integers(2 ** 63)), clock)
        log.append(rec)
        if rec.status == STATUS_COMPLETE:
            incumbents.append((rec.mean_error, len(log) - 1, rec))
            incumbents.sort(key=lambda t: (t[0], t[1]))
            del incumbents[policy.incumbent_count:]

    best = incumbents[0][2] if incumbents else None
    status = "complete" if best is not None else "incomplete"
    return RunResult(best, tuple(log), status, n_skipped,
                     budget.consumed_ticks - start_ticks, tuple(notes))
