"""Covariate transformations lambda(x) used by atoms and stick proportions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import DegenerateDataError, SpecError

KINDS = ("linear", "cubic-bspline", "natural-cubic-spline")
DEGREE = 3


@dataclass(frozen=True)
class BasisSpec:
    """A fully resolved basis: kind, per-covariate knots and intercept flag.

    Splines are additive: one block per covariate plus a single shared
    intercept column.
    """

    kind: str
    boundary: tuple[tuple[float, float], ...] = ()
    interior: tuple[tuple[float, ...], ...] = ()
    includes_intercept: bool = True
    n_covariates: int = field(default=0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown basis kind {self.kind!r}")
        boundary = tuple((float(lo), float(hi)) for lo, hi in self.boundary)
        interior = tuple(tuple(float(k) for k in ks) for ks in self.interior)
        object.__setattr__(self, "boundary", boundary)
        object.__setattr__(self, "interior", interior)
        if self.kind == "linear":
            if self.n_covariates < 1:
                raise SpecError("linear basis needs n_covariates >= 1")
            return
        p = len(boundary)
        if p < 1:
            raise SpecError("spline basis needs boundary knots for each covariate")
        if not interior:
            interior = ((),) * p
            object.__setattr__(self, "interior", interior)
        if len(interior) != p:
            raise SpecError("interior knots must be given for every covariate")
        object.__setattr__(self, "n_covariates", p)
        for (lo, hi), ks in zip(boundary, interior):
            if not lo < hi:
                raise SpecError("boundary knots must satisfy lo < hi")
            if any(b <= a for a, b in zip(ks, ks[1:])):
                raise SpecError("interior knots must be strictly increasing")
            if ks and not (lo < ks[0] and ks[-1] < hi):
                raise SpecError("interior knots must lie strictly inside the boundary knots")
            if self.kind == "natural-cubic-spline" and len(ks) < 1:
                raise SpecError("natural cubic splines need at least one interior knot")

    def block_size(self, d: int) -> int:
        if self.kind == "linear":
            return 1
        K = len(self.interior[d])
        if self.kind == "cubic-bspline":
            return K + DEGREE  # K + 4 B-splines, first dropped for identifiability
        return K + 1

    @property
    def dim(self) -> int:
        return int(self.includes_intercept) + sum(self.block_size(d) for d in range(self.n_covariates))

    def evaluate(self, X) -> np.ndarray:
        """Design matrix, one row per covariate vector."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_covariates:
            if X.shape[0] == self.n_covariates and X.shape[1] == 1:
                X = X.T
            else:
                raise SpecError(f"expected {self.n_covariates} covariates, got {X.shape[1]}")
        cols = [np.ones((X.shape[0], 1))] if self.includes_intercept else []
        for d in range(self.n_covariates):
            if self.kind == "linear":
                cols.append(X[:, d : d + 1])
            elif self.kind == "cubic-bspline":
                cols.append(_bspline_block(X[:, d], self.boundary[d], self.interior[d])[:, 1:])
            else:
                cols.append(_natural_block(X[:, d], self.boundary[d], self.interior[d]))
        return np.hstack(cols)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "boundary": [list(b) for b in self.boundary],
            "interior": [list(k) for k in self.interior],
            "includes_intercept": self.includes_intercept,
            "n_covariates": self.n_covariates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BasisSpec":
        return cls(
            kind=d["kind"],
            boundary=tuple(tuple(b) for b in d.get("boundary", ())),
            interior=tuple(tuple(k) for k in d.get("interior", ())),
            includes_intercept=d.get("includes_intercept", True),
            n_covariates=d.get("n_covariates", 0),
        )


def _full_knots(boundary, interior) -> np.ndarray:
    lo, hi = boundary
    return np.r_[[lo] * (DEGREE + 1), list(interior), [hi] * (DEGREE + 1)]


def bspline_columns(x, boundary, interior=()) -> np.ndarray:
    """All cubic B-splines of one covariate (no column dropped).

    Values outside the boundary are clamped to the nearest boundary knot.
    The rows form a partition of unity.
    """
    return _bspline_block(np.asarray(x, dtype=float), boundary, interior)


def _bspline_block(x, boundary, interior) -> np.ndarray:
    t = _full_knots(boundary, interior)
    nb = t.size - DEGREE - 1
    xc = np.clip(x, boundary[0], boundary[1])
    return BSpline(t, np.eye(nb), DEGREE, extrapolate=True)(xc)


def _natural_projection(boundary, interior) -> tuple[BSpline, np.ndarray]:
    t = _full_knots(boundary, interior)
    nb = t.size - DEGREE - 1
    spl = BSpline(t, np.eye(nb), DEGREE, extrapolate=True)
    # second derivatives at both boundary knots, first B-spline dropped
    const = spl.derivative(2)(np.array(boundary))[:, 1:]
    Q, _ = np.linalg.qr(const.T, mode="complete")
    return spl, Q[:, 2:]


def _natural_block(x, boundary, interior) -> np.ndarray:
    """Natural cubic spline columns: B-splines projected onto the null space of
    the boundary second-derivative constraints; linear beyond the boundary."""
    spl, proj = _natural_projection(boundary, interior)
    lo, hi = boundary
    xc = np.clip(x, lo, hi)
    B = spl(xc)[:, 1:]
    below = x < lo
    above = x > hi
    if below.any() or above.any():
        d1 = spl.derivative(1)(np.array([lo, hi]))[:, 1:]
        B = B.copy()
        B[below] += (x[below] - lo)[:, None] * d1[0]
        B[above] += (x[above] - hi)[:, None] * d1[1]
    return B @ proj


def linear_basis(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    return np.r_[1.0, x]


def bspline_basis(spec: BasisSpec, x) -> np.ndarray:
    if spec.kind != "cubic-bspline":
        raise SpecError("spec is not a cubic B-spline basis")
    return spec.evaluate(np.asarray(x, dtype=float).reshape(1, -1))[0]


def natural_spline_basis(spec: BasisSpec, x) -> np.ndarray:
    if spec.kind != "natural-cubic-spline":
        raise SpecError("spec is not a natural cubic spline basis")
    return spec.evaluate(np.asarray(x, dtype=float).reshape(1, -1))[0]


def knots_from_quantiles(column, K: int) -> list[float]:
    """Interior knots at levels k/(K+1), k = 1..K (linear-interpolation quantiles)."""
    column = np.asarray(column, dtype=float).ravel()
    if K < 1:
        raise SpecError("need at least one knot")
    if column.size < 2 or np.ptp(column) == 0:
        raise DegenerateDataError("cannot place knots on a constant column")
    levels = np.arange(1, K + 1) / (K + 1)
    knots = np.quantile(column, levels, method="linear")
    if np.any(np.diff(knots) <= 0):
        raise DegenerateDataError("quantile knots are not distinct")
    return [float(k) for k in knots]


def fit_basis(kind: str, X, n_interior: int = 0) -> BasisSpec:
    """Resolve a basis from training covariates: boundary at the column range,
    interior knots at quantiles."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = X.shape[1]
    if kind == "linear":
        return BasisSpec("linear", n_covariates=p)
    boundary = []
    interior = []
    for d in range(p):
        col = X[:, d]
        if np.ptp(col) == 0:
            raise DegenerateDataError(f"covariate {d} is constant")
        boundary.append((float(col.min()), float(col.max())))
        interior.append(tuple(knots_from_quantiles(col, n_interior)) if n_interior else ())
    return BasisSpec(kind, tuple(boundary), tuple(interior))
