"""Posterior predictive regression functions and conditional densities.

Every stored draw implies, at each test covariate, a finite mixture of normal
(or Student-t, for the collapsed joint model) densities for y. ``MixtureDraws``
keeps those mixtures as (draws, test points, components) arrays; means and
densities are derived from them and then summarized across draws.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import ParameterError, SpecError
from .inference.chain import Chain
from .inference.joint_dp import cluster_posteriors, regression_design
from .models import JointDPPrior, ModelSpec, log_mixture_weights
from .stats import RngStream, mvt_logpdf, niw_marginal_t, normal_logpdf, sample_nig, student_t_logpdf

GRID_SIZE = 201
LEVELS = (0.025, 0.975)
PREDICT_STREAM = 7


@dataclass
class MixtureDraws:
    """Per-draw predictive mixtures; ``df`` is inf for normal components."""

    weights: np.ndarray  # (D, T, K)
    loc: np.ndarray
    scale: np.ndarray
    df: np.ndarray
    mean_draws: np.ndarray | None = None  # (D, T) when regression draws are not sum(weights * loc)

    @property
    def n_draws(self) -> int:
        return self.weights.shape[0]

    def means(self) -> np.ndarray:
        """(D, T) regression-function draws."""
        if self.mean_draws is not None:
            return self.mean_draws
        return np.sum(self.weights * self.loc, axis=-1)

    def densities_at(self, t: int, grid: np.ndarray) -> np.ndarray:
        """(D, G) density draws at test point ``t``."""
        w, m, s, nu = (a[:, t, :, None] for a in (self.weights, self.loc, self.scale, self.df))
        g = np.asarray(grid)[None, None, :]
        if np.all(np.isinf(nu)):
            lk = normal_logpdf(g, m, s**2)
        else:
            nu_f = np.where(np.isinf(nu), 1e300, nu)
            lk = np.where(np.isinf(nu), normal_logpdf(g, m, s**2), student_t_logpdf(g, m, s, nu_f))
        with np.errstate(divide="ignore"):
            return np.exp(logsumexp(np.log(w) + lk, axis=1))

    def rescale(self, shift: float, factor: float) -> "MixtureDraws":
        """Mixtures for shift + factor * y."""
        md = None if self.mean_draws is None else shift + factor * self.mean_draws
        return MixtureDraws(self.weights, shift + factor * self.loc, factor * self.scale, self.df, md)


def y_grid(lo: float, hi: float, sd: float, size: int = GRID_SIZE) -> np.ndarray:
    """Equispaced grid over [lo - 3 sd, hi + 3 sd]."""
    if not sd > 0:
        raise ParameterError("grid needs a positive spread")
    return np.linspace(lo - 3.0 * sd, hi + 3.0 * sd, size)


def grid_from_meta(meta: dict) -> np.ndarray:
    t = meta["train_y"]
    return y_grid(t["min"], t["max"], t["sd"])


# ---------------------------------------------------------------------------
# per-family evaluation
# ---------------------------------------------------------------------------

def _kernel_mixture(chain: Chain, spec: ModelSpec, x_new, weight_fn) -> MixtureDraws:
    design = spec.atom_basis.evaluate(x_new)
    D, T, J = len(chain.draws), design.shape[0], chain.draws[0].beta.shape[0]
    W = np.empty((D, T, J))
    M = np.empty((D, T, J))
    S = np.empty((D, T, J))
    for d, dr in enumerate(chain.draws):
        W[d] = weight_fn(dr)
        M[d] = design @ dr.beta.T
        S[d] = np.sqrt(dr.sigma2)[None, :]
    return MixtureDraws(W, M, S, np.full_like(W, np.inf))


def predict_lddp(chain: Chain, spec: ModelSpec, x_new) -> MixtureDraws:
    """Constant weights, atoms lambda(x)'beta_j."""
    T = np.atleast_2d(x_new).shape[0]
    return _kernel_mixture(chain, spec, x_new, lambda dr: np.broadcast_to(dr.weights["omega"], (T, dr.weights["omega"].size)))


def predict_depweights(chain: Chain, spec: ModelSpec, x_new) -> MixtureDraws:
    """Covariate-dependent weights (logit sticks or normalized kernels)."""
    X = np.atleast_2d(x_new)
    return _kernel_mixture(chain, spec, X, lambda dr: np.exp(log_mixture_weights(spec, dr, X)))


def predict_joint_dp(chain: Chain, prior: JointDPPrior, x_new, rng=None) -> MixtureDraws:
    """Urn-weighted Student-t predictives of every occupied cluster plus a fresh one.

    Densities use the collapsed Student-t predictive of each cluster. With
    ``rng=None`` the regression draw is sum_s w_s(x) x'beta_hat_s with posterior-mean
    coefficients; given a generator, each cluster's coefficients are instead drawn
    from its normal-inverse-gamma posterior (a fresh cluster from the prior), so the
    band also reflects coefficient uncertainty.
    """
    X = np.atleast_2d(np.asarray(x_new, dtype=float))
    Dx = regression_design(X)
    n = len(chain.draws[0].allocations)
    alpha = prior.alpha
    K = max(int(dr.clusters["counts"].size) for dr in chain.draws) + 1
    D, T = len(chain.draws), X.shape[0]
    W = np.zeros((D, T, K))
    M = np.zeros((D, T, K))
    S = np.ones((D, T, K))
    NU = np.full((D, T, K), np.inf)
    MD = None if rng is None else np.empty((D, T))
    base = _cluster_terms(prior.covariates, prior.regression, X, Dx)
    for d, dr in enumerate(chain.draws):
        counts = dr.clusters["counts"]
        k = counts.size
        posts = [cluster_posteriors(prior, dr.clusters, j) for j in range(k)]
        terms = [_cluster_terms(px, py, X, Dx) for px, py in posts]
        terms.append(base)
        logw = np.column_stack([np.log(c) + t[0] for c, t in zip(counts, terms)] + [np.log(alpha) + base[0]])
        logw -= np.log(alpha + n)
        w = np.exp(logw - logsumexp(logw, axis=1, keepdims=True))
        W[d, :, : k + 1] = w
        for j, t in enumerate(terms):
            M[d, :, j], S[d, :, j], NU[d, :, j] = t[1], t[2], t[3]
        if MD is not None:
            beta = np.stack([sample_nig(py, rng)[0] for _, py in posts] + [sample_nig(prior.regression, rng)[0]])
            MD[d] = np.sum(w * (Dx @ beta.T), axis=1)
    return MixtureDraws(W, M, S, NU, MD)


def _cluster_terms(niw, nig, X, Dx):
    loc, shape, dof = niw_marginal_t(niw)
    lx = mvt_logpdf(X, loc, shape, dof)
    C = nig.cov
    m = Dx @ nig.mean
    scale = np.sqrt(nig.b / nig.a * (1.0 + np.einsum("ij,jk,ik->i", Dx, C, Dx)))
    return lx, m, scale, np.full(X.shape[0], 2.0 * nig.a)


def predict(chain: Chain, x_new) -> MixtureDraws:
    """Dispatch on the chain's family and undo any standardization applied at fit time."""
    if not chain.draws:
        raise SpecError("chain holds no draws")
    meta = chain.meta
    spec = ModelSpec.from_dict(meta["spec"])
    X = np.atleast_2d(np.asarray(x_new, dtype=float))
    if X.shape[1] != meta["p"]:
        if X.shape[0] == meta["p"] and X.shape[1] == 1:
            X = X.T
        else:
            raise ParameterError(f"test covariates have {X.shape[1]} columns, expected {meta['p']}")
    tr = meta.get("transform")
    if tr:
        X = (X - np.asarray(tr["x_mean"])) / np.asarray(tr["x_sd"])
    if spec.family == "joint-dp":
        from .inference import joint_prior_from_dict

        rng = RngStream(meta.get("seed", 0), meta.get("stream", 0)).child(PREDICT_STREAM).generator()
        mix = predict_joint_dp(chain, joint_prior_from_dict(meta["joint_prior"]), X, rng)
    elif spec.family in ("lddp", "lddp-bs"):
        mix = predict_lddp(chain, spec, X)
    else:
        mix = predict_depweights(chain, spec, X)
    if tr:
        mix = mix.rescale(tr["y_mean"], tr["y_sd"])
    return mix


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def summarize(values, levels=LEVELS, axis: int = 0):
    """Mean and equal-tailed empirical quantiles (type 7) across draws."""
    values = np.asarray(values, dtype=float)
    if values.shape[axis] < 2:
        raise ParameterError("at least two draws are needed for credible intervals")
    lo, hi = np.quantile(values, levels, axis=axis)
    return values.mean(axis=axis), lo, hi


@dataclass
class PredictiveSummary:
    x: np.ndarray  # (T, p)
    mean: np.ndarray  # (T,)
    lower: np.ndarray
    upper: np.ndarray
    grid: np.ndarray  # (G,)
    density_mean: np.ndarray  # (T, G)
    density_lower: np.ndarray
    density_upper: np.ndarray

    @property
    def ci_length(self) -> np.ndarray:
        return self.upper - self.lower

    def to_json(self) -> dict:
        return {k: np.asarray(getattr(self, k)).tolist() for k in self.__dataclass_fields__}

    @classmethod
    def from_json(cls, d: dict) -> "PredictiveSummary":
        return cls(**{k: np.asarray(d[k], dtype=float) for k in cls.__dataclass_fields__})

    def write(self, out_dir) -> Path:
        """``summary.json`` plus ``regression.csv`` (one row per x) and ``density.csv`` (one row per (x, y) cell)."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        xcols = [f"x{j + 1}" for j in range(self.x.shape[1])]
        (out / "summary.json").write_text(json.dumps(self.to_json()))
        with (out / "regression.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["point", *xcols, "mean", "lower", "upper"])
            for t in range(self.x.shape[0]):
                w.writerow([t, *map(repr, self.x[t].tolist()), repr(self.mean[t].item()),
                            repr(self.lower[t].item()), repr(self.upper[t].item())])
        with (out / "density.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["point", *xcols, "y", "density_mean", "density_lower", "density_upper"])
            for t in range(self.x.shape[0]):
                xs = list(map(repr, self.x[t].tolist()))
                for g, yv in enumerate(self.grid):
                    w.writerow([t, *xs, repr(float(yv)), repr(float(self.density_mean[t, g])),
                                repr(float(self.density_lower[t, g])), repr(float(self.density_upper[t, g]))])
        return out

    @classmethod
    def read(cls, out_dir) -> "PredictiveSummary":
        return cls.from_json(json.loads((Path(out_dir) / "summary.json").read_text()))


def summarize_mixtures(mix: MixtureDraws, x_new, grid, levels=LEVELS) -> PredictiveSummary:
    mean, lo, hi = summarize(mix.means(), levels)
    T, G = mean.size, len(grid)
    dm, dl, du = np.empty((T, G)), np.empty((T, G)), np.empty((T, G))
    for t in range(T):
        dm[t], dl[t], du[t] = summarize(mix.densities_at(t, grid), levels)
    return PredictiveSummary(np.atleast_2d(np.asarray(x_new, dtype=float)).reshape(T, -1), mean, lo, hi,
                             np.asarray(grid, dtype=float), dm, dl, du)


def predictive_summary(chain: Chain, x_new, grid=None) -> PredictiveSummary:
    grid = grid_from_meta(chain.meta) if grid is None else grid
    return summarize_mixtures(predict(chain, x_new), x_new, grid)
