"""The component pool: registry, schemas, defaults, and the fit/predict API.

Predictor cost factors drive the virtual clock; they also define the
cheap end of the pool used for probe evaluations on new datasets.  Only
the majority-class predictor tolerates missing values, so imputation is
load-bearing for every other path.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from ..configspace import (PREDICTOR, PREPROCESSOR, Categorical, ComponentRef,
                           Continuous, Hyperparam, HyperparamSchema, Integer)
from ..datasets import Dataset
from ..seeding import as_rng
from . import _predictors, _preprocessors
from ._errors import ArityError, InvalidPipelineError, MissingValuesError

__all__ = [
    "ArityError", "InvalidPipelineError", "MissingValuesError",
    "ComponentSpec", "TrainedModel", "component_specs", "get_spec",
    "predictor_ids", "preprocessor_ids", "default_pool", "default_template",
    "default_assignment", "registry_schemas", "fit", "predict",
    "fit_preprocessor", "apply_preprocessor",
]


@dataclass(frozen=True)
class ComponentSpec:
    ref: ComponentRef
    schema: HyperparamSchema
    defaults: dict
    cost_factor: int
    factory: Callable
    handles_missing: bool = False


def _spec(cid, kind, schema_entries, defaults, cost, factory, handles_missing=False):
    return ComponentSpec(
        ref=ComponentRef(cid, kind),
        schema=HyperparamSchema(schema_entries),
        defaults=defaults,
        cost_factor=cost,
        factory=factory,
        handles_missing=handles_missing,
    )


_SPECS: dict[str, ComponentSpec] = {}
for s in [
    _spec("impute", PREPROCESSOR,
          [Hyperparam("strategy", Categorical(("mean", "mode")))],
          {"strategy": "mean"}, 1, _preprocessors.Imputer),
    _spec("normalize", PREPROCESSOR, [], {}, 1, _preprocessors.MinMaxNormalizer),
    _spec("feature_subset", PREPROCESSOR,
          [Hyperparam("fraction", Continuous(0.05, 1.0))],
          {"fraction": 0.5}, 1, _preprocessors.FeatureSubset),
    _spec("majority", PREDICTOR, [], {}, 1, _predictors.Majority,
          handles_missing=True),
    _spec("knn", PREDICTOR,
          [Hyperparam("k", Integer(1, 40))],
          {"k": 3}, 2, _predictors.KNearest),
    _spec("naive_bayes", PREDICTOR,
          [Hyperparam("var_smoothing", Continuous(1e-12, 10.0))],
          {"var_smoothing": 1e-9}, 3, _predictors.GaussianNB),
    _spec("one_rule", PREDICTOR,
          [Hyperparam("bins", Integer(2, 40))],
          {"bins": 8}, 4, _predictors.OneRule),
    _spec("random_tree", PREDICTOR,
          [Hyperparam("max_depth", Integer(1, 25)),
           Hyperparam("min_leaf", Integer(1, 20))],
          {"max_depth": 10, "min_leaf": 2}, 6, _predictors.RandomTree),
    _spec("multinomial_nb", PREDICTOR,
          [Hyperparam("alpha", Continuous(1e-4, 100.0))],
          {"alpha": 0.5}, 9, _predictors.MultinomialNB),
    _spec("decision_tree", PREDICTOR,
          [Hyperparam("max_depth", Integer(1, 25)),
           Hyperparam("min_leaf", Integer(1, 20))],
          {"max_depth": 10, "min_leaf": 2}, 12, _predictors.DecisionTree),
    _spec("logistic", PREDICTOR,
          [Hyperparam("learning_rate", Continuous(1e-4, 10.0)),
           Hyperparam("epochs", Integer(5, 250)),
           Hyperparam("penalty", Categorical(("none", "l2"))),
           Hyperparam("l2_strength", Continuous(1e-6, 10.0),
                      condition=("penalty", "l2"))],
          {"learning_rate": 0.2, "epochs": 80, "penalty": "l2",
           "l2_strength": 1e-3}, 10, _predictors.Logistic),
    _spec("linear_svm", PREDICTOR,
          [Hyperparam("reg_lambda", Continuous(1e-7, 1.0)),
           Hyperparam("epochs", Integer(5, 250))],
          {"reg_lambda": 1e-4, "epochs": 80}, 20, _predictors.LinearSVM),
    _spec("bagging", PREDICTOR,
          [Hyperparam("n_estimators", Integer(2, 30)),
           Hyperparam("base_depth", Integer(1, 20))],
          {"n_estimators": 12, "base_depth": 8}, 45, _predictors.Bagging),
    _spec("random_forest", PREDICTOR,
          [Hyperparam("n_trees", Integer(4, 30)),
           Hyperparam("feature_rule", Categorical(("sqrt", "fraction"))),
           Hyperparam("feature_fraction", Continuous(0.1, 1.0),
                      condition=("feature_rule", "fraction"))],
          {"n_trees": 10, "feature_rule": "sqrt"}, 55, _predictors.RandomForest),
    _spec("boosting", PREDICTOR,
          [Hyperparam("n_estimators", Integer(5, 40)),
           Hyperparam("base_depth", Integer(1, 3)),
           Hyperparam("learning_rate", Continuous(0.1, 2.0))],
          {"n_estimators": 20, "base_depth": 1, "learning_rate": 1.0},
          70, _predictors.Boosting),
]:
    _SPECS[s.ref.id] = s


def component_specs() -> dict[str, ComponentSpec]:
    return dict(_SPECS)


def get_spec(component: str | ComponentRef) -> ComponentSpec:
    cid = component.id if isinstance(component, ComponentRef) else component
    try:
        return _SPECS[cid]
    except KeyError:
        raise KeyError(f"unknown component: {cid}") from None


def predictor_ids() -> list[str]:
    return [cid for cid, s in _SPECS.items() if s.ref.kind == PREDICTOR]


def preprocessor_ids() -> list[str]:
    return [cid for cid, s in _SPECS.items() if s.ref.kind == PREPROCESSOR]


def default_pool(predictors: list[str] | None = None
                 ) -> list[tuple[ComponentRef, HyperparamSchema]]:
    """(ref, schema) pairs for tree construction; optional predictor subset."""
    keep = set(predictors) if predictors is not None else None
    out = []
    for cid, s in _SPECS.items():
        if s.ref.kind == PREDICTOR and keep is not None and cid not in keep:
            continue
        out.append((s.ref, s.schema))
    if keep is not None:
        unknown = keep - set(predictor_ids())
        if unknown:
            raise KeyError(f"unknown predictors requested: {sorted(unknown)}")
    return out


def default_template() -> tuple[str, ...]:
    return ("impute", "normalize", "feature_subset")


def default_assignment(component: str | ComponentRef) -> dict:
    return dict(get_spec(component).defaults)


def registry_schemas() -> dict[str, tuple[ComponentRef, HyperparamSchema]]:
    return {cid: (s.ref, s.schema) for cid, s in _SPECS.items()}


@dataclass
class TrainedModel:
    component: ComponentRef
    impl: object
    n_features_in: int
    train_time: float
    degenerate: bool = False


def fit(component: str | ComponentRef, hyperparams: Mapping,
        train: Dataset, rng: int | np.random.Generator) -> TrainedModel:
    """Train a predictor on ``train``; pure given the rng seed."""
    spec = get_spec(component)
    if spec.ref.kind != PREDICTOR:
        raise InvalidPipelineError(f"{spec.ref.id} is not a predictor")
    spec.schema.validate_assignment(hyperparams)
    X, y = train.features, train.labels
    if len(y) == 0:
        raise InvalidPipelineError("empty training split")
    if not spec.handles_missing and np.isnan(X).any():
        raise MissingValuesError(
            f"{spec.ref.id} cannot train on missing values")
    t0 = time.perf_counter()
    present = np.unique(y)
    if len(present) < 2:
        impl = _predictors.ConstantModel(int(present[0]) if len(present) else 0)
        degenerate = True
    else:
        impl = spec.factory().fit(X, y, len(train.classes), dict(hyperparams),
                                  as_rng(rng))
        degenerate = False
    return TrainedModel(spec.ref, impl, X.shape[1],
                        time.perf_counter() - t0, degenerate)


def predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features_in:
        raise ArityError(
            f"expected {model.n_features_in} features, got "
            f"{X.shape[1] if X.ndim == 2 else 'non-matrix input'}")
    return model.impl.predict(X)


def fit_preprocessor(component: str | ComponentRef, hyperparams: Mapping,
                     train_features: np.ndarray,
                     rng: int | np.random.Generator):
    """Fit a preprocessor on training features only; returns the transform."""
    spec = get_spec(component)
    if spec.ref.kind != PREPROCESSOR:
        raise InvalidPipelineError(f"{spec.ref.id} is not a preprocessor")
    spec.schema.validate_assignment(hyperparams)
    return spec.factory().fit(np.asarray(train_features, dtype=np.float64),
                              dict(hyperparams), as_rng(rng))


def apply_preprocessor(component: str | ComponentRef, hyperparams: Mapping,
                       data: Dataset, fitted_on: Dataset,
                       rng: int | np.random.Generator = 0) -> Dataset:
    """Transform ``data`` with state learned from ``fitted_on`` alone."""
    impl = fit_preprocessor(component, hyperparams, fitted_on.features, rng)
    return data.with_features(impl.transform(data.features))
