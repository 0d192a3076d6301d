"""Mixture-weight constructions.

All functions work in log space and return simplex vectors (or one simplex per
row when given several covariate vectors).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_expit, logsumexp

from .basis import BasisSpec
from .errors import NumericError, ParameterError
from .stats import LOG_2PI


@dataclass(frozen=True)
class StickState:
    v: np.ndarray  # length J-1; the last stick is implicitly 1

    @property
    def J(self) -> int:
        return self.v.size + 1

    def weights(self) -> np.ndarray:
        return stick_break(self.v)


@dataclass(frozen=True)
class LogitStickParams:
    coef: np.ndarray  # (J-1, Q)
    basis: BasisSpec

    @property
    def J(self) -> int:
        return self.coef.shape[0] + 1


@dataclass(frozen=True)
class KernelWeightParams:
    omega: np.ndarray  # (J,)
    loc: np.ndarray  # (J, p)
    scale: np.ndarray  # (J, p) kernel variances

    def __post_init__(self):
        if np.any(self.omega < 0) or not np.isclose(self.omega.sum(), 1.0, atol=1e-10):
            raise ParameterError("baseline weights must form a simplex")
        if np.any(~(self.scale > 0)):
            raise ParameterError("kernel scales must be positive")


def log_stick_break(log_v: np.ndarray, log_1mv: np.ndarray) -> np.ndarray:
    """Log weights from log v and log(1-v) along the last axis (J-1 sticks -> J weights)."""
    shape = log_v.shape[:-1] + (log_v.shape[-1] + 1,)
    out = np.empty(shape)
    cum = np.cumsum(log_1mv, axis=-1)
    out[..., 0] = log_v[..., 0] if log_v.shape[-1] else 0.0
    if log_v.shape[-1]:
        out[..., 1:-1] = log_v[..., 1:] + cum[..., :-1]
        out[..., -1] = cum[..., -1]
    return out


def stick_break(v) -> np.ndarray:
    """omega_1 = v_1, omega_j = v_j prod_{l<j}(1 - v_l); the final weight takes the remainder."""
    v = np.asarray(v, dtype=float)
    if np.any((v < 0) | (v > 1)) or not np.all(np.isfinite(v)):
        raise ParameterError("stick proportions must lie in [0, 1]")
    J = v.shape[-1] + 1
    out = np.empty(v.shape[:-1] + (J,))
    rem = np.ones(v.shape[:-1])
    for j in range(J - 1):
        out[..., j] = v[..., j] * rem
        rem = rem * (1.0 - v[..., j])
    out[..., -1] = rem
    return out


def logit_stick_log_weights(coef: np.ndarray, design: np.ndarray) -> np.ndarray:
    """Log weights (n, J) from stick coefficients (J-1, Q) and a design matrix (n, Q)."""
    eta = design @ coef.T
    return log_stick_break(log_expit(eta), log_expit(-eta))


def logit_stick_weights(params: LogitStickParams, x) -> np.ndarray:
    X = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.ndim(x) <= 1
    w = np.exp(logit_stick_log_weights(params.coef, params.basis.evaluate(X)))
    return w[0] if single else w


def diag_gauss_logpdf(X: np.ndarray, loc: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """(n, J) log densities of x_i under diagonal Gaussian kernels with variances ``scale``."""
    X = np.atleast_2d(X)
    d = X[:, None, :] - loc[None, :, :]
    return -0.5 * np.sum(LOG_2PI + np.log(scale)[None] + d * d / scale[None], axis=-1)


def normalize_log_weights(log_omega: np.ndarray, log_kernel: np.ndarray) -> np.ndarray:
    """Log of omega_j k_j(x) / sum_l omega_l k_l(x), rows indexed by x."""
    a = log_omega + log_kernel
    norm = logsumexp(a, axis=-1, keepdims=True)
    if not np.all(np.isfinite(norm)):
        raise NumericError("all kernel values underflow at some covariate value")
    return a - norm


def joint_implied_weights(omega, log_kernel) -> np.ndarray:
    """Covariate-dependent weights implied by a joint mixture, given log k_j(x)."""
    omega = np.asarray(omega, dtype=float)
    lk = np.asarray(log_kernel, dtype=float)
    with np.errstate(divide="ignore"):
        lw = np.log(omega)
    return np.exp(normalize_log_weights(lw, lk))


def normalized_kernel_weights(params: KernelWeightParams, x) -> np.ndarray:
    X = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.ndim(x) <= 1
    w = joint_implied_weights(params.omega, diag_gauss_logpdf(X, params.loc, params.scale))
    return w[0] if single else w
