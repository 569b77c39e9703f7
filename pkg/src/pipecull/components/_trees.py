"""Shared axis-aligned decision tree builder (weighted gini).

Used by the single-tree predictors and by the ensemble wrappers.  Nodes
are plain tuples: ``("leaf", class)`` or ``("split", feature, threshold,
left, right)``.  Split search scans sorted feature values with prefix
sums, so ties resolve to the lowest feature index and lowest threshold.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


def _gini(class_weights: np.ndarray) -> float:
    total = class_weights.sum()
    if total <= 0:
        return 0.0
    p = class_weights / total
    return float(1.0 - (p * p).sum())


def build(X: np.ndarray, y: np.ndarray, n_classes: int, *,
          max_depth: int, min_leaf: int,
          rng: np.random.Generator | None = None,
          n_feature_candidates: int | None = None,
          sample_weight: np.ndarray | None = None):
    n, d = X.shape
    w = np.full(n, 1.0 / n) if sample_weight is None else sample_weight

    def grow(idx: np.ndarray, depth: int):
        yw = np.bincount(y[idx], weights=w[idx], minlength=n_classes)
        klass = int(yw.argmax())
        if depth >= max_depth or len(idx) < 2 * min_leaf:
            return ("leaf", klass)
        parent_gini = _gini(yw)
        if parent_gini <= _EPS:
            return ("leaf", klass)

        if n_feature_candidates is None or n_feature_candidates >= d:
            feats = range(d)
        else:
            feats = np.sort(rng.choice(d, n_feature_candidates, replace=False))

        best_score = np.inf
        best = None
        yi = y[idx]
        wi = w[idx]
        for f in feats:
            xs = X[idx, f]
            order = np.argsort(xs, kind="stable")
            xs_s = xs[order]
            onehot = np.zeros((len(idx), n_classes))
            onehot[np.arange(len(idx)), yi[order]] = wi[order]
            cum = onehot.cumsum(axis=0)
            totals = cum[-1]
            total_w = totals.sum()
            # candidate i splits after sorted position i (left size i+1)
            cand = np.flatnonzero(xs_s[:-1] < xs_s[1:])
            cand = cand[(cand + 1 >= min_leaf) & (len(idx) - cand - 1 >= min_leaf)]
            if len(cand) == 0:
                continue
            lw = cum[cand]
            rw = totals[None, :] - lw
            wl = lw.sum(axis=1)
            wr = rw.sum(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                gl = 1.0 - np.where(wl > 0, (lw * lw).sum(axis=1) / (wl * wl), 0.0)
                gr = 1.0 - np.where(wr > 0, (rw * rw).sum(axis=1) / (wr * wr), 0.0)
            score = (wl * np.nan_to_num(gl) + wr * np.nan_to_num(gr)) / total_w
            j = int(score.argmin())
            if score[j] < best_score - _EPS:
                best_score = float(score[j])
                thr = 0.5 * (xs_s[cand[j]] + xs_s[cand[j] + 1])
                best = (int(f), float(thr))
        if best is None or parent_gini - best_score <= _EPS:
            return ("leaf", klass)
        f, thr = best
        mask = X[idx, f] <= thr
        return ("split", f, thr, grow(idx[mask], depth + 1),
                grow(idx[~mask], depth + 1))

    return grow(np.arange(n), 0)


def predict(node, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X), dtype=np.int64)

    def walk(nd, idx):
        if nd[0] == "leaf":
            out[idx] = nd[1]
            return
        _, f, thr, left, right = nd
        mask = X[idx, f] <= thr
        walk(left, idx[mask])
        walk(right, idx[~mask])

    walk(node, np.arange(len(X)))
    return out
