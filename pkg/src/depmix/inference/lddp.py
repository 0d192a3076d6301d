"""Truncated blocked Gibbs sampler for single-weights DDP mixtures (LDDP, LDDP-BS)."""
from __future__ import annotations

import numpy as np

from ..dataset import Dataset
from ..draws import Draw
from ..models import LDDPPrior, ModelSpec
from ..stats import (
    sample_categorical_log,
    sample_mvn_precision,
    sample_wishart,
    spd_inverse,
)
from ..weights import log_stick_break
from .kernels import semiconjugate_update


def one_hot(s: np.ndarray, J: int) -> np.ndarray:
    Z = np.zeros((s.size, J))
    Z[np.arange(s.size), s] = 1.0
    return Z


class LDDPSampler:
    """Blocked Gibbs for y_i ~ sum_j omega_j N(lambda(x_i)' beta_j, sigma_j^2).

    Each sweep updates allocations, sticks, component (beta, sigma^2) and the
    base-measure hyperparameters (m, S). Components are semi-conjugate:
    beta_j ~ N(m, S) independently of 1/sigma_j^2 ~ Gamma(a, b).
    """

    def __init__(self, dataset: Dataset, spec: ModelSpec, prior: LDDPPrior):
        self.spec = spec
        self.prior = prior
        self.design = spec.atom_basis.evaluate(dataset.X)
        self.y = dataset.y.copy()
        self.J = int(spec.truncation)
        self.alpha = float(spec.alpha)
        Q = self.design.shape[1]
        if Q != prior.dim:
            raise ValueError("prior dimension does not match the atom basis")
        self.S0_inv, _ = spd_inverse(prior.S0)
        self.nuPsi = prior.nu * np.asarray(prior.Psi)
        self.n = self.y.size
        self.s = np.zeros(self.n, dtype=int)
        self.v = np.full(self.J - 1, 1.0 / (1.0 + self.alpha))
        self.m = np.asarray(prior.m0, dtype=float).copy()
        self.S = self.nuPsi / prior.nu
        self.S_inv, _ = spd_inverse(self.S)
        self.beta = np.tile(self.m, (self.J, 1))
        self.sigma2 = np.full(self.J, prior.b / max(prior.a - 1.0, 0.5))

    def initialize(self, rng):
        # all observations start in the first component; refresh parameters given that
        self.update_components(rng)
        self.update_sticks(rng)

    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return log_stick_break(np.log(self.v), np.log1p(-self.v))

    def update_allocations(self, rng):
        mu = self.design @ self.beta.T
        lp = (
            self.log_weights()[None, :]
            - 0.5 * np.log(self.sigma2)[None, :]
            - 0.5 * (self.y[:, None] - mu) ** 2 / self.sigma2[None, :]
        )
        self.s = sample_categorical_log(lp, rng)

    def update_sticks(self, rng):
        counts = np.bincount(self.s, minlength=self.J).astype(float)
        tail = np.cumsum(counts[::-1])[::-1]
        self.v = rng.beta(1.0 + counts[:-1], self.alpha + tail[1:])
        self.v = np.clip(self.v, 1e-300, 1.0)

    def update_components(self, rng):
        self.beta, self.sigma2 = semiconjugate_update(
            self.design, self.y, self.s, self.J, self.m, self.S_inv, self.prior.a, self.prior.b, self.sigma2, rng
        )

    def update_hyper(self, rng):
        J = self.J
        P = self.S0_inv + J * self.S_inv
        self.m = sample_mvn_precision(self.S0_inv @ self.prior.m0 + self.S_inv @ self.beta.sum(axis=0), P, rng)
        R = self.beta - self.m
        W_scale, _ = spd_inverse(self.nuPsi + R.T @ R)
        self.S_inv = sample_wishart(self.prior.nu + J, W_scale, rng)
        self.S, _ = spd_inverse(self.S_inv)

    def sweep(self, rng, adapt: bool = False):
        self.update_allocations(rng)
        self.update_sticks(rng)
        self.update_components(rng)
        self.update_hyper(rng)

    def draw(self) -> Draw:
        with np.errstate(divide="ignore"):
            omega = np.exp(self.log_weights())
        return Draw(
            allocations=self.s.copy(),
            beta=self.beta.copy(),
            sigma2=self.sigma2.copy(),
            weights={"omega": omega},
            extra={"m": self.m.copy()},
        )

    def diagnostics(self) -> dict:
        return {}
