"""Preprocessor implementations: fit on a training split, transform any split."""

from __future__ import annotations

import hashlib

import numpy as np

from ._errors import ArityError, InvalidPipelineError


def _hash_arrays(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        a = np.ascontiguousarray(p)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


class Imputer:
    """Fill missing entries with a per-column statistic from the train split.

    Columns with no observed training value cannot be filled and are
    dropped from both splits.
    """

    def fit(self, X: np.ndarray, params, rng) -> "Imputer":
        observed = ~np.isnan(X)
        self.kept = np.flatnonzero(observed.any(axis=0))
        if len(self.kept) == 0:
            raise InvalidPipelineError("no feature column has observed values")
        Xk = X[:, self.kept]
        if params["strategy"] == "mean":
            sums = np.nansum(Xk, axis=0)
            counts = (~np.isnan(Xk)).sum(axis=0)
            self.fill = sums / counts
        else:  # mode: most frequent observed value, ties to the smallest
            fill = np.empty(len(self.kept))
            for j in range(Xk.shape[1]):
                col = Xk[:, j]
                vals, counts = np.unique(col[~np.isnan(col)], return_counts=True)
                fill[j] = vals[counts.argmax()]
            self.fill = fill
        self.n_features_in = X.shape[1]
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != self.n_features_in:
            raise ArityError("imputer arity mismatch")
        Xk = X[:, self.kept].copy()
        nan_r, nan_c = np.nonzero(np.isnan(Xk))
        Xk[nan_r, nan_c] = self.fill[nan_c]
        return Xk

    def state_hash(self) -> str:
        return _hash_arrays(self.kept, self.fill)


class MinMaxNormalizer:
    """Map each column to [0, 1] by the training minimum and range."""

    def fit(self, X: np.ndarray, params, rng) -> "MinMaxNormalizer":
        obs = ~np.isnan(X)
        safe = np.where(obs, X, np.inf)
        self.lo = np.where(obs.any(axis=0), safe.min(axis=0), 0.0)
        safe = np.where(obs, X, -np.inf)
        hi = np.where(obs.any(axis=0), safe.max(axis=0), 0.0)
        self.span = hi - self.lo
        self.n_features_in = X.shape[1]
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != self.n_features_in:
            raise ArityError("normalizer arity mismatch")
        with np.errstate(invalid="ignore"):
            out = np.where(self.span > 0, (X - self.lo) / np.where(
                self.span > 0, self.span, 1.0), 0.0)
        out[np.isnan(X)] = np.nan
        return out

    def state_hash(self) -> str:
        return _hash_arrays(self.lo, self.span)


class FeatureSubset:
    """Project onto a random feature subset of size floor(fraction * d)."""

    def fit(self, X: np.ndarray, params, rng) -> "FeatureSubset":
        d = X.shape[1]
        k = int(np.floor(params["fraction"] * d))
        if k <= 0:
            raise InvalidPipelineError("feature subset would keep 0 features")
        self.idx = np.sort(rng.choice(d, size=k, replace=False))
        self.n_features_in = d
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != self.n_features_in:
            raise ArityError("feature subset arity mismatch")
        return X[:, self.idx]

    def state_hash(self) -> str:
        return _hash_arrays(self.idx)
