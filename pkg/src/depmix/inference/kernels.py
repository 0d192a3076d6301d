"""Updates for the per-component linear-regression kernels (beta_j, sigma_j^2)."""
from __future__ import annotations

import numpy as np

from ..stats import NIGParams, NormalGammaParams, nig_posterior, sample_mvn_precision, sample_nig


def _group(s, J):
    order = np.argsort(s, kind="stable")
    bounds = np.searchsorted(s[order], np.arange(J + 1))
    return [order[bounds[j] : bounds[j + 1]] for j in range(J)]


def semiconjugate_update(design, y, s, J, mean, precision, a, b, sigma2, rng):
    """One Gibbs pass: beta_j | sigma_j^2 then sigma_j^2 | beta_j, under beta_j ~ N(mean, precision^-1)
    independent of 1/sigma_j^2 ~ Gamma(a, b). Empty components draw from the prior."""
    Q = design.shape[1]
    beta = np.empty((J, Q))
    lin0 = precision @ mean
    groups = _group(s, J)
    counts = np.array([g.size for g in groups], dtype=float)
    rss = np.zeros(J)
    for j, idx in enumerate(groups):
        Xj, yj = design[idx], y[idx]
        P = precision + Xj.T @ Xj / sigma2[j]
        beta[j] = sample_mvn_precision(lin0 + Xj.T @ yj / sigma2[j], P, rng)
        r = yj - Xj @ beta[j]
        rss[j] = r @ r
    prec = rng.gamma(a + 0.5 * counts, 1.0 / (b + 0.5 * rss))
    return beta, 1.0 / prec


def sample_kernels(design, y, s, J, prior, rng, sigma2=None):
    """Draw every component's (beta_j, sigma_j^2) given allocations.

    A normal-inverse-gamma prior gives exact joint draws; an independent
    normal-gamma prior gives one semi-conjugate Gibbs pass started from ``sigma2``.
    """
    if isinstance(prior, NIGParams):
        Q = design.shape[1]
        beta = np.empty((J, Q))
        out = np.empty(J)
        for j, idx in enumerate(_group(s, J)):
            beta[j], out[j] = sample_nig(nig_posterior(prior, design[idx], y[idx]), rng)
        return beta, out
    if isinstance(prior, NormalGammaParams):
        if sigma2 is None:
            sigma2 = np.full(J, prior.b / max(prior.a - 1.0, 0.5))
        return semiconjugate_update(design, y, s, J, prior.mean, prior.precision, prior.a, prior.b, sigma2, rng)
    raise TypeError(f"unsupported kernel prior {type(prior).__name__}")


def prior_sigma2(prior) -> float:
    return prior.b / max(prior.a - 1.0, 0.5)
