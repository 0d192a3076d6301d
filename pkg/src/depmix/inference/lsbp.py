"""Gibbs sampler for logit stick-breaking mixtures of linear regressions.

Stick coefficients are updated by Polya-Gamma augmentation: at level h only
the observations allocated to components >= h are at risk, each contributing a
binary outcome 1(s_i = h) to a logistic regression on lambda(x_i).
"""
from __future__ import annotations

import numpy as np

from ..dataset import Dataset
from ..draws import Draw
from ..models import LSBPPrior, ModelSpec
from ..stats import sample_categorical_log, sample_mvn_precision, sample_polya_gamma
from ..weights import logit_stick_log_weights
from .kernels import prior_sigma2, sample_kernels


class LSBPSampler:
    def __init__(self, dataset: Dataset, spec: ModelSpec, prior: LSBPPrior):
        self.spec = spec
        self.prior = prior
        self.design = spec.atom_basis.evaluate(dataset.X)
        self.W = spec.weight_basis.evaluate(dataset.X)
        self.y = dataset.y.copy()
        self.J = int(spec.truncation)
        self.n = self.y.size
        self.coef_prec = 1.0 / np.asarray(prior.coef_var, dtype=float)
        self.coef_lin = self.coef_prec * np.asarray(prior.coef_mean, dtype=float)
        self.s = np.zeros(self.n, dtype=int)
        self.coef = np.tile(np.asarray(prior.coef_mean, dtype=float), (self.J - 1, 1))
        k = prior.kernel
        self.beta = np.tile(k.mean, (self.J, 1))
        self.sigma2 = np.full(self.J, prior_sigma2(k))

    def initialize(self, rng):
        self.update_kernels(rng)
        self.update_sticks(rng)

    def log_weights(self) -> np.ndarray:
        return logit_stick_log_weights(self.coef, self.W)

    def update_allocations(self, rng):
        mu = self.design @ self.beta.T
        lp = (
            self.log_weights()
            - 0.5 * np.log(self.sigma2)[None, :]
            - 0.5 * (self.y[:, None] - mu) ** 2 / self.sigma2[None, :]
        )
        self.s = sample_categorical_log(lp, rng)

    def update_sticks(self, rng):
        J = self.J
        # (observation, level) pairs at risk: level h < s_i + 1, h < J - 1
        levels = np.minimum(self.s, J - 2) + 1
        obs = np.repeat(np.arange(self.n), levels)
        lev = np.arange(levels.sum()) - np.repeat(np.cumsum(levels) - levels, levels)
        eta = np.einsum("ij,ij->i", self.W[obs], self.coef[lev])
        omega = sample_polya_gamma(eta, rng)
        kappa = (self.s[obs] == lev).astype(float) - 0.5
        Q = self.W.shape[1]
        order = np.argsort(lev, kind="stable")
        bounds = np.searchsorted(lev[order], np.arange(J))
        for h in range(J - 1):
            idx = order[bounds[h] : bounds[h + 1]]
            Wh = self.W[obs[idx]]
            P = np.diag(self.coef_prec) + (Wh * omega[idx, None]).T @ Wh
            lin = self.coef_lin + Wh.T @ kappa[idx]
            self.coef[h] = sample_mvn_precision(lin, P, rng) if Q else self.coef[h]

    def update_kernels(self, rng):
        self.beta, self.sigma2 = sample_kernels(self.design, self.y, self.s, self.J, self.prior.kernel, rng, self.sigma2)

    def sweep(self, rng, adapt: bool = False):
        self.update_allocations(rng)
        self.update_sticks(rng)
        self.update_kernels(rng)

    def draw(self) -> Draw:
        return Draw(
            allocations=self.s.copy(),
            beta=self.beta.copy(),
            sigma2=self.sigma2.copy(),
            weights={"coef": self.coef.copy()},
        )

    def diagnostics(self) -> dict:
        return {}
