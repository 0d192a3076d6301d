"""The three simulated benchmarks, their ground truth and the evaluation metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .dataset import Dataset
from .errors import ParameterError
from .stats import RngStream

DEFAULT_N = {1: 200, 2: 400, 3: 600}
N_TEST = 200
TEST_SEED = 8_675_309
EXAMPLES = (1, 2, 3)


def _check_id(example: int) -> int:
    if example not in EXAMPLES:
        raise ParameterError(f"example id must be one of {EXAMPLES}, got {example!r}")
    return int(example)


# ---------------------------------------------------------------------------
# covariate laws
# ---------------------------------------------------------------------------

def _covariates_1(n, rng):
    x1 = rng.uniform(-1.0, 8.0, n)
    x2 = rng.normal((x1 - 3.5) ** 2 / 3.0 - 1.0, 0.05)
    return np.column_stack([x1, x2])


def _covariates_2(n, rng):
    return rng.uniform(-2.0, 10.0, n)[:, None]


def _covariates_3(n, rng):
    return rng.uniform(-2.0, 2.0, (n, 2))


_COVARIATES: dict[int, Callable] = {1: _covariates_1, 2: _covariates_2, 3: _covariates_3}


# ---------------------------------------------------------------------------
# truth
# ---------------------------------------------------------------------------

def _as_matrix(example: int, x) -> np.ndarray:
    p = 1 if example == 2 else 2
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x[:, None] if p == 1 else x.reshape(-1, p)
    if x.shape[1] != p:
        raise ParameterError(f"example {example} has {p} covariate(s)")
    return x


def true_mean(example: int, x) -> np.ndarray:
    """m(x) at each row of x."""
    example = _check_id(example)
    X = _as_matrix(example, x)
    if example == 1:
        return 5.0 - np.log(X[:, 0] + 2.0)
    if example == 2:
        x = X[:, 0]
        return np.where(x <= 2.0, 0.0, np.where(x <= 5.0, 2.0 * x - 4.0, 6.0))
    return np.where(np.sin(X[:, 0] * X[:, 1] * np.pi / 2.0) <= 0.0, 1.0, -1.0)


def true_sd(example: int, x) -> np.ndarray:
    example = _check_id(example)
    X = _as_matrix(example, x)
    if example == 1:
        return np.full(X.shape[0], 0.05)
    if example == 2:
        x = X[:, 0]
        # boundary points take the left segment's value
        return np.where(x <= 2.0, 0.2, np.where(x <= 5.0, 0.05, np.sqrt((x - 5.0) ** 2 / 15.0 + 0.01)))
    return np.full(X.shape[0], 0.1)


def true_density(example: int, x, grid) -> np.ndarray:
    """(T, G) Gaussian conditional densities f0(y | x) on ``grid``."""
    m = true_mean(example, x)[:, None]
    s = true_sd(example, x)[:, None]
    g = np.asarray(grid, dtype=float)[None, :]
    return np.exp(-0.5 * ((g - m) / s) ** 2) / (s * np.sqrt(2.0 * np.pi))


@dataclass(frozen=True)
class ExampleTruth:
    example: int
    mean: Callable
    density: Callable
    sample_covariates: Callable


def truth(example: int) -> ExampleTruth:
    e = _check_id(example)
    return ExampleTruth(
        e,
        lambda x: true_mean(e, x),
        lambda x, grid: true_density(e, x, grid),
        lambda n, rng: _COVARIATES[e](n, rng),
    )


def generate_example(example: int, n: int | None = None, seed: int = 0) -> Dataset:
    example = _check_id(example)
    n = DEFAULT_N[example] if n is None else int(n)
    if n < 1:
        raise ParameterError("n must be at least 1")
    rng = RngStream(seed, example).generator()
    X = _COVARIATES[example](n, rng)
    y = true_mean(example, X) + true_sd(example, X) * rng.standard_normal(n)
    return Dataset(y, X)


def test_points(example: int, size: int = N_TEST, seed: int = TEST_SEED) -> np.ndarray:
    """Evaluation covariates drawn from the example's covariate law under a dedicated seed."""
    example = _check_id(example)
    return _COVARIATES[example](size, RngStream(seed, 100 + example).generator())


test_points.__test__ = False  # not a pytest test despite the name


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def rmse_regression(predicted, truth_values) -> float:
    a = np.asarray(predicted, dtype=float).ravel()
    b = np.asarray(truth_values, dtype=float).ravel()
    if a.size != b.size or a.size < 1:
        raise ParameterError("predicted and true means must have the same positive length")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def l1_density_error(estimated, true, grid) -> float:
    """Trapezoid-rule integral of |f_hat - f0| per test point, averaged over points."""
    est = np.atleast_2d(np.asarray(estimated, dtype=float))
    tru = np.atleast_2d(np.asarray(true, dtype=float))
    grid = np.asarray(grid, dtype=float).ravel()
    if est.shape != tru.shape or est.shape[1] != grid.size:
        raise ParameterError("density arrays must share the grid")
    return float(np.mean(trapezoid(np.abs(est - tru), grid, axis=1)))


def coverage_and_length(lower, upper, truth_values) -> tuple[float, float]:
    lo = np.asarray(lower, dtype=float).ravel()
    hi = np.asarray(upper, dtype=float).ravel()
    m = np.asarray(truth_values, dtype=float).ravel()
    if not (lo.size == hi.size == m.size) or lo.size < 1:
        raise ParameterError("bounds and truth must have the same positive length")
    if np.any(lo > hi):
        raise ParameterError("credible bounds are not ordered")
    covered = (lo <= m) & (m <= hi)
    return float(covered.mean()), float(np.mean(hi - lo))


METRIC_KEYS = ("regression_err", "density_err", "coverage", "ci_length")


def evaluate_summary(example: int, summary) -> dict:
    """The four table metrics for a PredictiveSummary evaluated against the truth."""
    m = true_mean(example, summary.x)
    f0 = true_density(example, summary.x, summary.grid)
    cov, length = coverage_and_length(summary.lower, summary.upper, m)
    return {
        "regression_err": rmse_regression(summary.mean, m),
        "density_err": l1_density_error(summary.density_mean, f0, summary.grid),
        "coverage": cov,
        "ci_length": length,
    }
