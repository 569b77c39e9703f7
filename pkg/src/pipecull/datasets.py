"""Datasets: the in-memory type, CSV I/O, and synthetic generators.

A dataset holds a numeric feature matrix (NaN marks a missing entry) and
integer-coded class labels.  CSV files carry a header row; the label
column defaults to the last one; empty feature fields are missing.

The synthetic families each favour a different predictor family, which
gives experiments a known-structure benchmark where per-dataset
specialists exist.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .seeding import rng_for


class DatasetError(ValueError):
    """The data violates the dataset contract or cannot be parsed."""


@dataclass
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray
    classes: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DatasetError("features must be a 2-d matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise DatasetError("one label per instance required")
        if not self.classes:
            self.classes = tuple(str(c) for c in np.unique(self.labels))

    @property
    def n_instances(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.features).any())

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def validate(self) -> "Dataset":
        """Full contract check, applied to top-level datasets.

        Fold slices are allowed to violate the per-class minimum, so this
        is not part of construction.
        """
        if self.labels.min(initial=0) < 0 or self.labels.max(initial=0) >= self.n_classes:
            raise DatasetError("label codes outside class list")
        counts = self.class_counts()
        present = counts[counts > 0]
        if len(present) < 2:
            raise DatasetError(f"{self.name}: need at least 2 classes")
        if present.min() < 2:
            raise DatasetError(f"{self.name}: need at least 2 instances per class")
        if self.n_instances < 4:
            raise DatasetError(f"{self.name}: too few instances")
        return self

    def subset(self, idx: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(name or self.name, self.features[idx], self.labels[idx],
                       self.classes)

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(self.name, features, self.labels, self.classes)


def load_csv(path: str, label_column: str | None = None,
             name: str | None = None) -> Dataset:
    """Read a header-ed CSV; empty feature fields become NaN."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    if label_column is None:
        label_idx = len(header) - 1
    else:
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise DatasetError(f"{path}: no column named {label_column!r}") from None
    feat_idx = [i for i in range(len(header)) if i != label_idx]
    if not feat_idx:
        raise DatasetError(f"{path}: no feature columns")

    n = len(rows)
    features = np.empty((n, len(feat_idx)), dtype=np.float64)
    raw_labels = []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {r + 2} has {len(row)} fields, "
                               f"expected {len(header)}")
        for c, i in enumerate(feat_idx):
            cell = row[i].strip()
            if cell == "":
                features[r, c] = np.nan
            else:
                try:
                    features[r, c] = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"{path}: non-numeric feature value {cell!r} "
                        f"(row {r + 2}, column {header[i]!r})") from None
        raw_labels.append(row[label_idx].strip())

    classes = tuple(sorted(set(raw_labels)))
    code = {c: i for i, c in enumerate(classes)}
    labels = np.array([code[v] for v in raw_labels], dtype=np.int64)
    if name is None:
        base = path.replace("\\", "/").rsplit("/", 1)[-1]
        name = base[:-4] if base.endswith(".csv") else base
    return Dataset(name, features, labels, classes).validate()


def save_csv(dataset: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(dataset.n_features)] + ["label"])
        for row, y in zip(dataset.features, dataset.labels):
            cells = ["" if np.isnan(v) else repr(float(v)) for v in row]
            writer.writerow(cells + [dataset.classes[y]])


def inject_missing(dataset: Dataset, rate: float, seed: int) -> Dataset:
    """Blank a random subset of feature cells, at most half of any column."""
    rng = rng_for(seed, "missing", dataset.name)
    X = dataset.features.copy()
    mask = rng.random(X.shape) < rate
    # Keep every column mostly observed so imputation stays meaningful.
    for j in range(X.shape[1]):
        col = np.flatnonzero(mask[:, j])
        limit = X.shape[0] // 2
        if len(col) > limit:
            mask[col[limit:], j] = False
    X[mask] = np.nan
    return dataset.with_features(X)


def _finish(name: str, X: np.ndarray, y: np.ndarray, rng: np.random.Generator,
            n_noise: int) -> Dataset:
    if n_noise:
        X = np.hstack([X, rng.normal(0.0, 1.0, size=(X.shape[0], n_noise))])
    order = rng.permutation(len(y))
    return Dataset(name, X[order], y[order]).validate()


def make_blobs(name: str, seed: int, n: int = 96, n_classes: int = 3,
               spread: float = 0.8, n_noise: int = 1) -> Dataset:
    """Gaussian clusters; nearest-neighbour territory."""
    rng = rng_for(seed, "blobs", name)
    centers = rng.uniform(-4.0, 4.0, size=(n_classes, 3))
    per = n // n_classes
    Xs, ys = [], []
    for c in range(n_classes):
        m = per + (1 if c < n % n_classes else 0)
        Xs.append(rng.normal(centers[c], spread, size=(m, 3)))
        ys.append(np.full(m, c))
    return _finish(name, np.vstack(Xs), np.concatenate(ys), rng, n_noise)


def make_xor(name: str, seed: int, n: int = 96, n_noise: int = 4) -> Dataset:
    """Axis-aligned XOR on two features; tree territory, noise hurts knn."""
    rng = rng_for(seed, "xor", name)
    X2 = rng.uniform(-1.0, 1.0, size=(n, 2))
    y = ((X2[:, 0] > 0) ^ (X2[:, 1] > 0)).astype(np.int64)
    margin = 0.15
    X2[:, 0] += np.sign(X2[:, 0]) * margin
    X2[:, 1] += np.sign(X2[:, 1]) * margin
    # Both block dims sit strictly below zero so the pattern carries no
    # nonnegative-evidence signal, only geometry.
    X2 -= 1.3
    return _finish(name, X2, y, rng, n_noise)


def make_rings(name: str, seed: int, n: int = 96, gap: float = 1.0,
               n_noise: int = 0) -> Dataset:
    """Concentric annuli; local methods win, single splits do not."""
    rng = rng_for(seed, "rings", name)
    half = n // 2
    radii = np.concatenate([
        rng.uniform(0.0, 1.0, size=half),
        rng.uniform(1.0 + gap, 2.0 + gap, size=n - half),
    ])
    y = np.concatenate([np.zeros(half, dtype=np.int64),
                        np.ones(n - half, dtype=np.int64)])
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    X = np.column_stack([radii * np.cos(theta), radii * np.sin(theta)])
    return _finish(name, X, y, rng, n_noise)


def make_linear(name: str, seed: int, n: int = 96, d: int = 12,
                noise: float = 0.25) -> Dataset:
    """Three classes as parallel bands along a direction no feature shows.

    Each feature carries a small alternating-sign loading on the scoring
    latent plus large loadings on two shared nuisance factors, so any
    single column is nearly uninformative and per-feature independence
    assumptions double-count the shared nuisance.  Jointly trained linear
    models invert the mixing and recover the bands.
    """
    rng = rng_for(seed, "linear", name)
    score_latent = rng.normal(0.0, 1.0, size=n)
    nuisance = rng.normal(0.0, 1.0, size=(n, 2))
    signs = np.where(np.arange(d) % 2 == 0, 1.0, -1.0)
    loadings = rng.normal(0.0, 1.0, size=(d, 2))
    X = (0.35 * signs)[None, :] * score_latent[:, None] \
        + nuisance @ loadings.T \
        + 0.3 * rng.normal(0.0, 1.0, size=(n, d))
    score = score_latent + rng.normal(0.0, noise, size=n)
    cut = 0.55
    y = np.digitize(score, [-cut, cut]).astype(np.int64)
    return _finish(name, X, y, rng, 0)


def make_counts(name: str, seed: int, n: int = 96, d: int = 24,
                tilt: float = 1.15) -> Dataset:
    """Count vectors whose class profiles share support but tilt apart.

    Document length varies freely and carries no label signal, so
    distance- and threshold-based methods chase scale while pooled
    profile likelihoods aggregate the per-feature tilt cleanly.
    """
    rng = rng_for(seed, "counts", name)
    base = rng.dirichlet(np.full(d, 2.0))
    signs = rng.choice([-1.0, 1.0], size=d)
    theta0 = base * np.exp(0.5 * tilt * signs)
    theta1 = base * np.exp(-0.5 * tilt * signs)
    theta0 /= theta0.sum()
    theta1 /= theta1.sum()
    half = n // 2
    Xs, ys = [], []
    for theta, c, m in ((theta0, 0, half), (theta1, 1, n - half)):
        totals = rng.integers(2, 17, size=m)
        rows = [rng.multinomial(t, theta) for t in totals]
        Xs.append(np.array(rows, dtype=np.float64))
        ys.append(np.full(m, c))
    return _finish(name, np.vstack(Xs), np.concatenate(ys), rng, 0)


def make_stripes(name: str, seed: int, n: int = 96, n_bands: int = 6,
                 n_noise: int = 6, margin: float = 0.1) -> Dataset:
    """Class alternates across bands of a single feature; one-feature rules win.

    A wide margin keeps coarse equal-width bins accurate out of the box;
    shrinking it with many bands makes single-feature rules depend on
    getting the bin count right.
    """
    rng = rng_for(seed, "stripes", name)
    band = rng.integers(0, n_bands, size=n)
    # The band feature stays strictly negative: the alternation is pure
    # geometry, with no nonnegative-evidence signal to aggregate.
    x0 = band + margin + (1.0 - 2.0 * margin) * rng.random(n) - n_bands - 0.5
    y = (band % 2).astype(np.int64)
    return _finish(name, x0[:, None], y, rng, n_noise)


def make_varblobs(name: str, seed: int, n: int = 96, d: int = 12) -> Dataset:
    """Classes share a common mean and differ only in per-feature spread.

    Mean-based linear separators carry no signal here; per-feature
    variance modelling does.
    """
    rng = rng_for(seed, "varblobs", name)
    tight, loose = 0.8, 2.0
    third = d // 3
    sigmas = np.full((3, d), loose)
    for c in range(3):
        sigmas[c, c * third:(c + 1) * third] = tight
    per = n // 3
    Xs, ys = [], []
    for c in range(3):
        m = per + (1 if c < n % 3 else 0)
        Xs.append(rng.normal(0.0, sigmas[c], size=(m, d)))
        ys.append(np.full(m, c))
    return _finish(name, np.vstack(Xs), np.concatenate(ys), rng, 0)


def make_boxes(name: str, seed: int, n: int = 96, n_noise: int = 4,
               label_noise: float = 0.0) -> Dataset:
    """Nested axis-aligned rectangles; greedy axis splits carve them exactly.

    ``label_noise`` reassigns that fraction of labels uniformly, so
    fully-grown trees memorise the flips while pruned ones shrug them
    off.
    """
    rng = rng_for(seed, "boxes", name)
    X2 = rng.uniform(-3.0, 3.0, size=(n, 2))
    inside = np.abs(X2).max(axis=1)
    y = np.where(inside < 1.0, 2, np.where(inside < 2.0, 1, 0)).astype(np.int64)
    # Push points away from the box edges so folds stay learnable.
    for edge in (1.0, 2.0):
        for j in (0, 1):
            near = np.abs(np.abs(X2[:, j]) - edge) < 0.15
            X2[near, j] += np.sign(X2[near, j]) * 0.2
    inside = np.abs(X2).max(axis=1)
    y = np.where(inside < 1.0, 2, np.where(inside < 2.0, 1, 0)).astype(np.int64)
    if label_noise > 0.0:
        flip = rng.random(n) < label_noise
        y[flip] = rng.integers(0, 3, size=int(flip.sum()))
    return _finish(name, X2, y, rng, n_noise)


# Third element: missing-value rate as a fraction of the standard rate
# (True means the full standard rate, False means fully observed).
_BENCHMARK_FAMILIES: tuple[tuple[str, object, bool | float], ...] = (
    ("varblobs", make_varblobs, True),
    ("xor", make_xor, False),
    ("counts", make_counts, True),
    ("linear", make_linear, False),
    ("stripes",
     lambda name, seed, n=96: make_stripes(name, seed, n, n_bands=9,
                                           n_noise=6, margin=0.03),
     True),
    ("boxes",
     lambda name, seed, n=96: make_boxes(name, seed, n, n_noise=10,
                                         label_noise=0.12),
     False),
    ("xor", make_xor, False),
    ("boxes",
     lambda name, seed, n=96: make_boxes(name, seed, n, n_noise=8),
     0.5),
)


def benchmark_datasets(seed: int, n_datasets: int = 8,
                       missing_rate: float = 0.25,
                       n_instances: int = 56) -> list[Dataset]:
    """The known-structure benchmark: one favoured family per dataset.

    Roughly half the datasets carry missing values so that validity
    pre-checking has something to save.
    """
    out = []
    for i in range(n_datasets):
        family, fn, with_missing = _BENCHMARK_FAMILIES[i % len(_BENCHMARK_FAMILIES)]
        name = f"{family}-{i}"
        ds = fn(name, seed * 1000 + i, n=n_instances)
        rate = missing_rate * float(with_missing)
        if rate > 0.0:
            ds = inject_missing(ds, rate, seed * 1000 + i)
        out.append(ds.validate())
    return out
