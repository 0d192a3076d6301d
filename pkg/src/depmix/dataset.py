from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class Dataset:
    """A response vector and covariate matrix with column names."""

    y: np.ndarray
    X: np.ndarray
    columns: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != y.size:
            raise ParameterError("X and y have different numbers of rows")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ParameterError("dataset contains non-finite values")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        if not self.columns:
            object.__setattr__(self, "columns", tuple(f"x{d + 1}" for d in range(X.shape[1])))
        elif len(self.columns) != X.shape[1]:
            raise ParameterError("column names do not match covariate count")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.y[idx], self.X[idx], self.columns)


def write_csv(path, data: Dataset, extra: dict[str, np.ndarray] | None = None) -> None:
    path = Path(path)
    extra = extra or {}
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", *data.columns, *extra])
        cols = [data.y, *data.X.T, *extra.values()]
        for row in zip(*cols):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path) -> Dataset:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "y":
        raise ParameterError(f"{path}: expected a header starting with 'y'")
    header = rows[0]
    body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if body.size == 0:
        raise ParameterError(f"{path}: no data rows")
    return Dataset(body[:, 0], body[:, 1:], tuple(header[1:]))


def read_covariates(path) -> np.ndarray:
    """Test covariates from a CSV whose header is x1[,x2...] (a y column is ignored)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    keep = [k for k, name in enumerate(header) if name != "y"]
    return np.array([[float(r[k]) for k in keep] for r in rows[1:] if r], dtype=float)
