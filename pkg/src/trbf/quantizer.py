"""Kohonen self-organizing map used as a per-class token quantizer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import EmptyInputError


@dataclass(frozen=True)
class SomConfig:
    rows: int = 16
    cols: int = 16
    epochs: int = 50
    alpha0: float = 0.5
    radius0: Optional[float] = None
    seed: int = 0

    def validate(self) -> "SomConfig":
        if self.rows < 1 or self.cols < 1:
            raise ValueError("SOM grid needs rows, cols >= 1")
        if self.epochs < 1:
            raise ValueError("SOM needs epochs >= 1")
        if not (0.0 < self.alpha0 <= 1.0):
            raise ValueError("SOM alpha0 must lie in (0, 1]")
        if self.radius0 is not None and self.radius0 <= 0:
            raise ValueError("SOM radius0 must be positive")
        return self

    @property
    def start_radius(self) -> float:
        return self.radius0 if self.radius0 is not None else max(self.rows, self.cols) / 2.0


@dataclass(frozen=True)
class SomGrid:
    units: np.ndarray  # (rows * cols, d), row-major
    hits: np.ndarray  # (rows * cols,)
    rows: int
    cols: int

    @property
    def dim(self) -> int:
        return self.units.shape[1]


def _as_vectors(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        if vectors.ndim != 2:
            raise ValueError(f"expected a 2-D array of vectors, got shape {vectors.shape}")
        X = vectors.astype(float)
    else:
        rows = [np.asarray(v, dtype=float).ravel() for v in vectors]
        if rows and len({r.size for r in rows}) != 1:
            raise ValueError("input vectors differ in dimension")
        X = np.array(rows, dtype=float)
    if X.shape[0] == 0:
        raise EmptyInputError("cannot train a SOM on zero vectors")
    return X


def _sq_dists(X, units):
    return (
        np.sum(X**2, axis=1)[:, None] - 2.0 * X @ units.T + np.sum(units**2, axis=1)[None, :]
    )


def bmu_indices(units: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Best matching unit per row of X (lowest index wins ties)."""
    # exact differences, not the expanded form, so ties resolve identically
    # to a linear scan
    out = np.empty(X.shape[0], dtype=int)
    for i, x in enumerate(X):
        out[i] = int(np.argmin(np.sum((units - x) ** 2, axis=1)))
    return out


def best_matching_unit(grid: SomGrid, x) -> int:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != grid.dim:
        raise ValueError(f"vector has dimension {x.size}, SOM expects {grid.dim}")
    return int(np.argmin(np.sum((grid.units - x) ** 2, axis=1)))


def quantization_error(units: np.ndarray, X: np.ndarray) -> float:
    """Mean Euclidean distance from each vector to its best matching unit."""
    d2 = np.maximum(_sq_dists(X, units), 0.0)
    return float(np.mean(np.sqrt(d2.min(axis=1))))


def train_som(vectors, cfg: SomConfig = SomConfig(), trace: Optional[list] = None) -> SomGrid:
    """Online Kohonen training with linearly decaying rate and radius.

    Presentation order is reshuffled every epoch from ``cfg.seed``. When
    ``trace`` is a list, the mean quantization error after each epoch is
    appended to it.
    """
    cfg.validate()
    X = _as_vectors(vectors)
    rng = np.random.default_rng(cfg.seed)
    n_units = cfg.rows * cfg.cols
    units = X[rng.choice(X.shape[0], size=n_units, replace=X.shape[0] < n_units)].copy()

    rr, cc = np.divmod(np.arange(n_units), cfg.cols)
    coords = np.stack([rr, cc], axis=1).astype(float)
    grid_d2 = np.sum((coords[:, None, :] - coords[None, :, :]) ** 2, axis=2)

    total = cfg.epochs * X.shape[0]
    r_start, r_end = cfg.start_radius, 0.5
    t = 0
    for _ in range(cfg.epochs):
        for i in rng.permutation(X.shape[0]):
            frac = t / total
            alpha = cfg.alpha0 * (1.0 - frac)
            radius = r_start + (r_end - r_start) * frac
            x = X[i]
            win = int(np.argmin(np.sum((units - x) ** 2, axis=1)))
            h = np.exp(-grid_d2[win] / (2.0 * radius * radius))
            units += (alpha * h)[:, None] * (x - units)
            t += 1
        if trace is not None:
            trace.append(quantization_error(units, X))

    hits = np.bincount(bmu_indices(units, X), minlength=n_units)
    return SomGrid(units=units, hits=hits, rows=cfg.rows, cols=cfg.cols)


def codebook(grid: SomGrid, min_hits: int = 0) -> np.ndarray:
    """Unit vectors with at least ``min_hits`` wins, in row-major order."""
    if min_hits < 0:
        raise ValueError("min_hits must be >= 0")
    return grid.units[grid.hits >= min_hits].copy()


class SomQuantizer(BaseEstimator, TransformerMixin):
    """Per-class SOM codebooks.

    ``fit(X, y)`` trains one map per label on flattened tokens; the
    resulting prototypes are exposed as ``prototypes_`` (shape like X
    minus the sample axis) with labels in ``prototype_labels_``.
    ``transform`` maps each row to its best matching prototype.
    """

    def __init__(self, rows=16, cols=16, epochs=50, alpha0=0.5, radius0=None, min_hits=1, random_state=0):
        self.rows = rows
        self.cols = cols
        self.epochs = epochs
        self.alpha0 = alpha0
        self.radius0 = radius0
        self.min_hits = min_hits
        self.random_state = random_state

    def _config(self, offset=0):
        return SomConfig(
            rows=self.rows,
            cols=self.cols,
            epochs=self.epochs,
            alpha0=self.alpha0,
            radius0=self.radius0,
            seed=int(self.random_state or 0) + offset,
        )

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.shape[0] == 0:
            raise EmptyInputError("cannot quantize an empty token set")
        flat = X.reshape(X.shape[0], -1)
        y = np.zeros(X.shape[0], dtype=int) if y is None else np.asarray(y)
        self.classes_ = np.unique(y)
        self.grids_, protos, labels = {}, [], []
        for k, cls in enumerate(self.classes_):
            grid = train_som(flat[y == cls], self._config(offset=k))
            self.grids_[cls] = grid
            book = codebook(grid, self.min_hits)
            protos.append(book)
            labels.extend([cls] * len(book))
        self.prototypes_ = np.concatenate(protos).reshape((-1,) + X.shape[1:])
        self.prototype_labels_ = np.asarray(labels)
        return self

    def transform(self, X):
        check_is_fitted(self, "prototypes_")
        X = np.asarray(X, dtype=float)
        flat = self.prototypes_.reshape(len(self.prototypes_), -1)
        return self.prototypes_[bmu_indices(flat, X.reshape(X.shape[0], -1))]
