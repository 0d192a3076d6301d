"""Metropolis-within-Gibbs for mixtures with normalized Gaussian-kernel weights.

The weight of component j at x is omega_j K_j(x) / sum_l omega_l K_l(x). Given
allocations, the likelihood of the gating parameters contains the product of
the inverse normalizers D_i = sum_l omega_l K_l(x_i), which is evaluated
explicitly in every Metropolis-Hastings ratio.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln, log_expit, logsumexp

from ..dataset import Dataset
from ..draws import Draw
from ..models import ModelSpec, NWPrior
from ..stats import sample_categorical_log
from ..weights import diag_gauss_logpdf, log_stick_break
from .kernels import prior_sigma2, sample_kernels

ADAPT_EVERY = 50
TARGET_LOW, TARGET_HIGH = 0.2, 0.4
WARN_LOW, WARN_HIGH = 0.05, 0.8


def omega_to_logits(omega: np.ndarray) -> np.ndarray:
    """Inverse stick-breaking: logit of v_j = omega_j / (1 - sum_{l<j} omega_l)."""
    rem = 1.0 - np.concatenate([[0.0], np.cumsum(omega[:-2])])
    v = np.clip(omega[:-1] / np.maximum(rem, 1e-300), 1e-12, 1 - 1e-12)
    return np.log(v) - np.log1p(-v)


class NWSampler:
    def __init__(self, dataset: Dataset, spec: ModelSpec, prior: NWPrior, proposal_scales: dict | None = None):
        self.spec = spec
        self.prior = prior
        self.X = dataset.X
        self.design = spec.atom_basis.evaluate(dataset.X)
        self.y = dataset.y.copy()
        self.J = int(spec.truncation)
        self.n, self.p = self.X.shape
        J, p = self.J, self.p
        self.gamma = float(prior.concentration)
        # Dirichlet(gamma, ..., gamma) written as independent Beta(gamma, (J - j) gamma) sticks
        self.stick_b = self.gamma * (J - 1 - np.arange(J - 1))

        scales = dict(proposal_scales or {})
        self.step_omega = float(scales.get("omega", 0.1))
        self.step_kernel = np.full(J, float(scales.get("kernel", 0.3)))
        self.loc_sd = np.sqrt(np.asarray(prior.loc_var, dtype=float))

        self.s = np.zeros(self.n, dtype=int)
        self.u = omega_to_logits(np.full(J, 1.0 / J)) if J > 1 else np.zeros(0)
        self.loc = np.tile(np.asarray(prior.loc_mean, dtype=float), (J, 1))
        a, b = np.asarray(prior.scale_shape, float), np.asarray(prior.scale_rate, float)
        self.scale = np.tile(b / np.maximum(a - 1.0, 0.5), (J, 1))
        k = prior.kernel
        self.beta = np.tile(k.mean, (J, 1))
        self.sigma2 = np.full(J, prior_sigma2(k))
        self.logK = diag_gauss_logpdf(self.X, self.loc, self.scale)

        self._acc = {"omega": 0, "kernel": np.zeros(J)}
        self._tries = {"omega": 0, "kernel": np.zeros(J)}
        self._batch = 0
        self._post_acc = {"omega": 0, "kernel": np.zeros(J)}
        self._post_tries = {"omega": 0, "kernel": np.zeros(J)}
        self._burned = False

    def initialize(self, rng):
        self.update_kernels(rng)

    # ------------------------------------------------------------------ targets
    def log_omega(self, u=None) -> np.ndarray:
        u = self.u if u is None else u
        return log_stick_break(log_expit(u), log_expit(-u))

    def log_norm(self, log_omega, logK) -> np.ndarray:
        return logsumexp(log_omega[None, :] + logK, axis=1)

    def log_target_omega(self, u) -> float:
        lv, l1v = log_expit(u), log_expit(-u)
        lo = log_stick_break(lv, l1v)
        counts = np.bincount(self.s, minlength=self.J)
        # Beta(a, b) stick density in logit coordinates: a log v + b log(1 - v)
        prior = np.sum(self.gamma * lv + self.stick_b * l1v)
        occupied = counts > 0
        return float(prior + np.sum(counts[occupied] * lo[occupied]) - self.log_norm(lo, self.logK).sum())

    def _kernel_prior(self, loc, scale) -> float:
        pr = self.prior
        a = np.asarray(pr.scale_shape, float)
        b = np.asarray(pr.scale_rate, float)
        lp_loc = -0.5 * np.sum((loc - pr.loc_mean) ** 2 / pr.loc_var)
        # inverse-gamma density of the variance plus the log-variance Jacobian
        lp_scale = np.sum(a * np.log(b) - gammaln(a) - a * np.log(scale) - b / scale)
        return float(lp_loc + lp_scale)

    def log_target_kernel(self, j, loc, scale, logK_col=None) -> float:
        if logK_col is None:
            logK_col = diag_gauss_logpdf(self.X, loc[None, :], scale[None, :])[:, 0]
        logK = self.logK.copy()
        logK[:, j] = logK_col
        mine = self.s == j
        return float(self._kernel_prior(loc, scale) + logK_col[mine].sum() - self.log_norm(self.log_omega(), logK).sum())

    def kernel_log_ratio(self, j, loc_new, scale_new) -> float:
        """log target(new) - log target(current) for component j's gating kernel."""
        return self.log_target_kernel(j, loc_new, scale_new) - self.log_target_kernel(j, self.loc[j], self.scale[j])

    def omega_log_ratio(self, u_new) -> float:
        return self.log_target_omega(u_new) - self.log_target_omega(self.u)

    # ------------------------------------------------------------------ updates
    def update_allocations(self, rng):
        mu = self.design @ self.beta.T
        lp = (
            self.log_omega()[None, :]
            + self.logK
            - 0.5 * np.log(self.sigma2)[None, :]
            - 0.5 * (self.y[:, None] - mu) ** 2 / self.sigma2[None, :]
        )
        self.s = sample_categorical_log(lp, rng)

    def update_kernels(self, rng):
        self.beta, self.sigma2 = sample_kernels(self.design, self.y, self.s, self.J, self.prior.kernel, rng, self.sigma2)

    def update_omega(self, rng):
        if self.J < 2:
            return
        u_new = self.u + self.step_omega * rng.standard_normal(self.u.size)
        ratio = self.omega_log_ratio(u_new)
        self._tries["omega"] += 1
        if np.log(rng.uniform()) < ratio:
            self.u = u_new
            self._acc["omega"] += 1

    def update_gating_kernels(self, rng):
        lo = self.log_omega()
        log_norm = self.log_norm(lo, self.logK)
        for j in range(self.J):
            step = self.step_kernel[j]
            loc_new = self.loc[j] + step * self.loc_sd * rng.standard_normal(self.p)
            scale_new = self.scale[j] * np.exp(step * rng.standard_normal(self.p))
            col_new = diag_gauss_logpdf(self.X, loc_new[None, :], scale_new[None, :])[:, 0]
            logK_new = self.logK.copy()
            logK_new[:, j] = col_new
            log_norm_new = self.log_norm(lo, logK_new)
            mine = self.s == j
            ratio = (
                self._kernel_prior(loc_new, scale_new)
                - self._kernel_prior(self.loc[j], self.scale[j])
                + col_new[mine].sum()
                - self.logK[mine, j].sum()
                - log_norm_new.sum()
                + log_norm.sum()
            )
            self._tries["kernel"][j] += 1
            if np.log(rng.uniform()) < ratio:
                self.loc[j], self.scale[j] = loc_new, scale_new
                self.logK = logK_new
                log_norm = log_norm_new
                self._acc["kernel"][j] += 1

    def _adapt(self):
        self._batch += 1
        if self._batch < ADAPT_EVERY:
            return
        if self._tries["omega"]:
            r = self._acc["omega"] / self._tries["omega"]
            self.step_omega *= 0.7 if r < TARGET_LOW else (1.3 if r > TARGET_HIGH else 1.0)
        r = self._acc["kernel"] / np.maximum(self._tries["kernel"], 1)
        self.step_kernel *= np.where(r < TARGET_LOW, 0.7, np.where(r > TARGET_HIGH, 1.3, 1.0))
        self._acc = {"omega": 0, "kernel": np.zeros(self.J)}
        self._tries = {"omega": 0, "kernel": np.zeros(self.J)}
        self._batch = 0

    def sweep(self, rng, adapt: bool = False):
        self.update_allocations(rng)
        self.update_kernels(rng)
        acc0, tries0 = self._acc["omega"], self._tries["omega"]
        k_acc0, k_tries0 = self._acc["kernel"].copy(), self._tries["kernel"].copy()
        self.update_omega(rng)
        self.update_gating_kernels(rng)
        if adapt:
            self._adapt()
        elif self._burned:
            self._post_acc["omega"] += self._acc["omega"] - acc0
            self._post_tries["omega"] += self._tries["omega"] - tries0
            self._post_acc["kernel"] += self._acc["kernel"] - k_acc0
            self._post_tries["kernel"] += self._tries["kernel"] - k_tries0

    def end_burn_in(self):
        self._burned = True

    def draw(self) -> Draw:
        return Draw(
            allocations=self.s.copy(),
            beta=self.beta.copy(),
            sigma2=self.sigma2.copy(),
            weights={"omega": np.exp(self.log_omega()), "loc": self.loc.copy(), "scale": self.scale.copy()},
        )

    def diagnostics(self) -> dict:
        out = {"step_omega": self.step_omega, "step_kernel": self.step_kernel.tolist(), "warnings": []}
        if self._post_tries["omega"]:
            r = self._post_acc["omega"] / self._post_tries["omega"]
            out["acceptance_omega"] = r
            if not WARN_LOW <= r <= WARN_HIGH:
                out["warnings"].append(f"omega acceptance {r:.3f} outside [{WARN_LOW}, {WARN_HIGH}]")
        if self._post_tries["kernel"].sum():
            r = self._post_acc["kernel"] / np.maximum(self._post_tries["kernel"], 1)
            out["acceptance_kernel"] = r.tolist()
            bad = np.flatnonzero((r < WARN_LOW) | (r > WARN_HIGH))
            if bad.size:
                out["warnings"].append(f"kernel acceptance outside [{WARN_LOW}, {WARN_HIGH}] for components {bad.tolist()}")
        return out
