"""Predictor implementations.

Every class follows the same contract: ``fit(X, y, n_classes, params,
rng)`` returns self, ``predict(X)`` returns int label codes.  All label
tie-breaks go to the smallest class code (numpy argmax order), which the
evaluation layer relies on for determinism.
"""

from __future__ import annotations

import numpy as np

from . import _trees


def _standardize_fit(X: np.ndarray):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return mu, sd


class ConstantModel:
    """Fallback when the training split holds a single class."""

    def __init__(self, klass: int) -> None:
        self.klass = klass

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(len(X), self.klass, dtype=np.int64)


class Majority:
    def fit(self, X, y, n_classes, params, rng):
        counts = np.bincount(y, minlength=n_classes)
        self.klass = int(counts.argmax())
        return self

    def predict(self, X):
        return np.full(len(X), self.klass, dtype=np.int64)


class OneRule:
    """Best single-feature rule over equal-width bins of that feature."""

    def fit(self, X, y, n_classes, params, rng):
        bins = params["bins"]
        n, d = X.shape
        overall = int(np.bincount(y, minlength=n_classes).argmax())
        best = (np.inf, 0)
        best_state = None
        for j in range(d):
            col = X[:, j]
            lo, hi = col.min(), col.max()
            edges = np.linspace(lo, hi, bins + 1)[1:-1]
            binned = np.digitize(col, edges)
            table = np.zeros((bins, n_classes))
            np.add.at(table, (binned, y), 1.0)
            rule = np.where(table.sum(axis=1) > 0, table.argmax(axis=1), overall)
            err = float(np.mean(rule[binned] != y))
            if err < best[0]:
                best = (err, j)
                best_state = (j, edges, rule.astype(np.int64))
        self.feature, self.edges, self.rule = best_state
        return self

    def predict(self, X):
        binned = np.digitize(X[:, self.feature], self.edges)
        return self.rule[binned]


class KNearest:
    """k-nearest neighbours, Euclidean distance on min-max scaled features."""

    def fit(self, X, y, n_classes, params, rng):
        self.k = params["k"]
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        self.lo = lo
        self.span = np.where(span > 0, span, 1.0)
        self.X = (X - lo) / self.span
        self.y = y
        self.n_classes = n_classes
        return self

    def predict(self, X):
        Q = (X - self.lo) / self.span
        d2 = ((Q[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=-1)
        k = min(self.k, len(self.y))
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        out = np.empty(len(X), dtype=np.int64)
        for i in range(len(X)):
            votes = np.bincount(self.y[order[i]], minlength=self.n_classes)
            out[i] = int(votes.argmax())
        return out


class GaussianNB:
    def fit(self, X, y, n_classes, params, rng):
        floor = params["var_smoothing"] * max(float(np.var(X, axis=0).max()), 1e-12)
        self.mu = np.zeros((n_classes, X.shape[1]))
        self.var = np.full((n_classes, X.shape[1]), floor if floor > 0 else 1e-12)
        counts = np.bincount(y, minlength=n_classes).astype(np.float64)
        for c in range(n_classes):
            Xc = X[y == c]
            if len(Xc):
                self.mu[c] = Xc.mean(axis=0)
                self.var[c] = np.var(Xc, axis=0) + max(floor, 1e-12)
        with np.errstate(divide="ignore"):
            self.log_prior = np.log(counts) - np.log(counts.sum())
        return self

    def predict(self, X):
        ll = -0.5 * (np.log(2.0 * np.pi * self.var)[None, :, :]
                     + (X[:, None, :] - self.mu[None, :, :]) ** 2
                     / self.var[None, :, :]).sum(axis=-1)
        return np.argmax(ll + self.log_prior[None, :], axis=1).astype(np.int64)


class RandomTree:
    """A single tree scanning sqrt(d) random feature candidates per node."""

    def fit(self, X, y, n_classes, params, rng):
        k = max(1, int(np.ceil(np.sqrt(X.shape[1]))))
        self.root = _trees.build(
            X, y, n_classes, max_depth=params["max_depth"],
            min_leaf=params["min_leaf"], rng=rng, n_feature_candidates=k)
        return self

    def predict(self, X):
        return _trees.predict(self.root, X)


class DecisionTree:
    def fit(self, X, y, n_classes, params, rng):
        self.root = _trees.build(
            X, y, n_classes, max_depth=params["max_depth"],
            min_leaf=params["min_leaf"])
        return self

    def predict(self, X):
        return _trees.predict(self.root, X)


class RandomForest:
    def fit(self, X, y, n_classes, params, rng):
        n, d = X.shape
        if params["feature_rule"] == "sqrt":
            k = max(1, int(np.ceil(np.sqrt(d))))
        else:
            k = max(1, int(np.floor(params["feature_fraction"] * d)))
        self.trees = []
        self.n_classes = n_classes
        for _ in range(params["n_trees"]):
            boot = rng.integers(0, n, size=n)
            self.trees.append(_trees.build(
                X[boot], y[boot], n_classes, max_depth=20, min_leaf=1,
                rng=rng, n_feature_candidates=k))
        return self

    def predict(self, X):
        votes = np.zeros((len(X), self.n_classes))
        for t in self.trees:
            pred = _trees.predict(t, X)
            votes[np.arange(len(X)), pred] += 1.0
        return np.argmax(votes, axis=1).astype(np.int64)


class Logistic:
    """Multinomial logistic regression by full-batch gradient descent."""

    def fit(self, X, y, n_classes, params, rng):
        self.mu, self.sd = _standardize_fit(X)
        Z = (X - self.mu) / self.sd
        n, d = Z.shape
        W = np.zeros((d, n_classes))
        b = np.zeros(n_classes)
        Y = np.zeros((n, n_classes))
        Y[np.arange(n), y] = 1.0
        lr = params["learning_rate"]
        lam = params.get("l2_strength", 0.0) if params["penalty"] == "l2" else 0.0
        for _ in range(params["epochs"]):
            scores = Z @ W + b
            scores -= scores.max(axis=1, keepdims=True)
            P = np.exp(scores)
            P /= P.sum(axis=1, keepdims=True)
            G = (P - Y) / n
            W_next = W - lr * (Z.T @ G + lam * W)
            b_next = b - lr * G.sum(axis=0)
            # An overlarge step can diverge; keep the last sane iterate.
            if not (np.isfinite(W_next).all() and np.isfinite(b_next).all()
                    and np.abs(W_next).max() < 1e100):
                break
            W, b = W_next, b_next
        self.W, self.b = W, b
        return self

    def predict(self, X):
        Z = (X - self.mu) / self.sd
        return np.argmax(Z @ self.W + self.b, axis=1).astype(np.int64)


class LinearSVM:
    """One-vs-rest linear SVM trained by hinge subgradient descent."""

    def fit(self, X, y, n_classes, params, rng):
        self.mu, self.sd = _standardize_fit(X)
        Z = (X - self.mu) / self.sd
        n, d = Z.shape
        lam = params["reg_lambda"]
        self.W = np.zeros((d, n_classes))
        self.b = np.zeros(n_classes)
        for c in range(n_classes):
            t = np.where(y == c, 1.0, -1.0)
            w = np.zeros(d)
            b = 0.0
            for epoch in range(params["epochs"]):
                lr = 0.5 / np.sqrt(epoch + 1.0)
                margin = t * (Z @ w + b)
                viol = margin < 1.0
                gw = lam * w - (t[viol, None] * Z[viol]).sum(axis=0) / n
                gb = -t[viol].sum() / n
                w -= lr * gw
                b -= lr * gb
            self.W[:, c] = w
            self.b[c] = b
        return self

    def predict(self, X):
        Z = (X - self.mu) / self.sd
        return np.argmax(Z @ self.W + self.b, axis=1).astype(np.int64)


class Bagging:
    """Bootstrap-aggregated full-feature trees."""

    def fit(self, X, y, n_classes, params, rng):
        n = len(y)
        self.trees = []
        self.n_classes = n_classes
        for _ in range(params["n_estimators"]):
            boot = rng.integers(0, n, size=n)
            self.trees.append(_trees.build(
                X[boot], y[boot], n_classes,
                max_depth=params["base_depth"], min_leaf=1))
        return self

    def predict(self, X):
        votes = np.zeros((len(X), self.n_classes))
        for t in self.trees:
            pred = _trees.predict(t, X)
            votes[np.arange(len(X)), pred] += 1.0
        return np.argmax(votes, axis=1).astype(np.int64)


class Boosting:
    """Multi-class adaptive boosting over shallow weighted trees."""

    def fit(self, X, y, n_classes, params, rng):
        n = len(y)
        w = np.full(n, 1.0 / n)
        self.stages = []
        self.n_classes = n_classes
        lr = params["learning_rate"]
        for _ in range(params["n_estimators"]):
            tree = _trees.build(X, y, n_classes,
                                max_depth=params["base_depth"], min_leaf=1,
                                sample_weight=w)
            pred = _trees.predict(tree, X)
            miss = pred != y
            err = float(w[miss].sum() / w.sum())
            if err >= 1.0 - 1.0 / n_classes:
                if not self.stages:
                    self.stages.append((tree, 1.0))
                break
            err = max(err, 1e-10)
            alpha = lr * (np.log((1.0 - err) / err) + np.log(n_classes - 1.0))
            self.stages.append((tree, alpha))
            if err <= 1e-10:
                break
            w = w * np.exp(alpha * miss)
            w /= w.sum()
        return self

    def predict(self, X):
        scores = np.zeros((len(X), self.n_classes))
        for tree, alpha in self.stages:
            pred = _trees.predict(tree, X)
            scores[np.arange(len(X)), pred] += alpha
        return np.argmax(scores, axis=1).astype(np.int64)


class MultinomialNB:
    """Count-model naive Bayes; negative feature values clip to zero."""

    def fit(self, X, y, n_classes, params, rng):
        alpha = params["alpha"]
        Xs = np.maximum(X, 0.0)
        d = X.shape[1]
        counts = np.bincount(y, minlength=n_classes).astype(np.float64)
        feat = np.zeros((n_classes, d))
        for c in range(n_classes):
            rows = Xs[y == c]
            if len(rows):
                feat[c] = rows.sum(axis=0)
        totals = feat.sum(axis=1, keepdims=True)
        self.log_theta = np.log(feat + alpha) - np.log(totals + alpha * d)
        with np.errstate(divide="ignore"):
            self.log_prior = np.log(counts) - np.log(counts.sum())
        return self

    def predict(self, X):
        Xs = np.maximum(X, 0.0)
        scores = Xs @ self.log_theta.T + self.log_prior[None, :]
        return np.argmax(scores, axis=1).astype(np.int64)
