"""Collapsed Gibbs sampler for a DP mixture on (x, y).

Each cluster carries a normal-inverse-Wishart model for x and a normal-inverse-
gamma linear regression for y given x. Both are integrated out, so the state is
the partition alone. Allocation probabilities use the Student-t posterior
predictives of each cluster, which are cached and refreshed only for the two
clusters touched by a move. The inner loop is compiled with numba; uniforms
come from the numpy generator so runs are reproducible.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from ..dataset import Dataset
from ..draws import Draw
from ..errors import NumericError, ParameterError
from ..models import JointDPPrior
from ..stats import NIGParams, NIWParams

CLUSTER_FIELDS = ("counts", "sx", "sxx", "XtX", "Xty", "yy")
RESYNC_EVERY = 100


def regression_design(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    return np.column_stack([np.ones(X.shape[0]), X])


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _niw_cache(count, sx, sxx, m0, k0, nu0, S0, loc, Sinv, extra):
    """Fill loc, Sinv and extra = (logdet shape, dof, log-normalizer) for a cluster's x-predictive."""
    p = m0.size
    kn = k0 + count
    nun = nu0 + count
    mn = (k0 * m0 + sx) / kn
    # S_n = S0 + sxx + k0 m0 m0' - kn mn mn'
    S = S0 + sxx + k0 * np.outer(m0, m0) - kn * np.outer(mn, mn)
    dof = nun - p + 1.0
    shape = S * (kn + 1.0) / (kn * dof)
    L = np.linalg.cholesky(shape)
    logdet = 0.0
    for d in range(p):
        logdet += 2.0 * math.log(L[d, d])
    inv = np.linalg.inv(shape)
    for d in range(p):
        loc[d] = mn[d]
        for e in range(p):
            Sinv[d, e] = inv[d, e]
    extra[0] = logdet
    extra[1] = dof
    extra[2] = (
        math.lgamma(0.5 * (dof + p)) - math.lgamma(0.5 * dof)
        - 0.5 * p * math.log(dof * math.pi) - 0.5 * logdet
    )


@numba.njit(cache=True)
def _nig_cache(XtX, Xty, yy, P0, P0m0, m0P0m0, a0, b0, mean, C, extra):
    """Fill posterior mean, C = P_n^{-1} and extra = (a_n, b_n, unused) for a cluster's regression."""
    Pn = P0 + XtX
    Cn = np.linalg.inv(Pn)
    mn = Cn @ (P0m0 + Xty)
    count = extra[2]
    an = a0 + 0.5 * count
    bn = b0 + 0.5 * (yy + m0P0m0 - mn @ Pn @ mn)
    if bn < b0 * 1e-12:
        bn = b0 * 1e-12
    Q = mean.size
    for d in range(Q):
        mean[d] = mn[d]
        for e in range(Q):
            C[d, e] = Cn[d, e]
    extra[0] = an
    extra[1] = bn


@numba.njit(cache=True)
def _log_pred(x, xt, y, loc, Sinv, niw_extra, mean, C, nig_extra):
    p = x.size
    q = 0.0
    for d in range(p):
        for e in range(p):
            q += (x[d] - loc[d]) * Sinv[d, e] * (x[e] - loc[e])
    dof = niw_extra[1]
    lx = niw_extra[2] - 0.5 * (dof + p) * math.log1p(q / dof)
    an, bn = nig_extra[0], nig_extra[1]
    m = 0.0
    v = 0.0
    Q = xt.size
    for d in range(Q):
        m += xt[d] * mean[d]
        for e in range(Q):
            v += xt[d] * C[d, e] * xt[e]
    df = 2.0 * an
    scale2 = bn / an * (1.0 + v)
    z2 = (y - m) ** 2 / scale2
    ly = (
        math.lgamma(0.5 * (df + 1.0)) - math.lgamma(0.5 * df)
        - 0.5 * math.log(df * math.pi * scale2) - 0.5 * (df + 1.0) * math.log1p(z2 / df)
    )
    return lx + ly


@numba.njit(cache=True)
def _refresh(k, X, D, y, counts, sx, sxx, XtX, Xty, yy, pri, loc, Sinv, niw_x, mean, C, nig_x):
    m0, k0, nu0, S0, P0, P0m0, m0P0m0, a0, b0 = pri
    _niw_cache(counts[k], sx[k], sxx[k], m0, k0, nu0, S0, loc[k], Sinv[k], niw_x[k])
    nig_x[k, 2] = counts[k]
    _nig_cache(XtX[k], Xty[k], yy[k], P0, P0m0, m0P0m0, a0, b0, mean[k], C[k], nig_x[k])


@numba.njit(cache=True)
def _move(i, k, sign, X, D, y, counts, sx, sxx, XtX, Xty, yy):
    x = X[i]
    xt = D[i]
    counts[k] += sign
    sx[k] += sign * x
    sxx[k] += sign * np.outer(x, x)
    XtX[k] += sign * np.outer(xt, xt)
    Xty[k] += sign * xt * y[i]
    yy[k] += sign * y[i] * y[i]
    if counts[k] < 0.5:
        # an emptied cluster restarts from exact zeros
        counts[k] = 0.0
        sx[k] = 0.0
        sxx[k] = 0.0
        XtX[k] = 0.0
        Xty[k] = 0.0
        yy[k] = 0.0


@numba.njit(cache=True)
def _sweep(z, u, X, D, y, log_alpha, log_m0, counts, sx, sxx, XtX, Xty, yy,
           pri, loc, Sinv, niw_x, mean, C, nig_x):
    n = y.size
    K = counts.size
    logp = np.empty(K + 1)
    for i in range(n):
        k_old = z[i]
        _move(i, k_old, -1.0, X, D, y, counts, sx, sxx, XtX, Xty, yy)
        if counts[k_old] > 0.5:
            _refresh(k_old, X, D, y, counts, sx, sxx, XtX, Xty, yy, pri, loc, Sinv, niw_x, mean, C, nig_x)
        empty = -1
        mx = -np.inf
        for k in range(K):
            if counts[k] > 0.5:
                logp[k] = math.log(counts[k]) + _log_pred(
                    X[i], D[i], y[i], loc[k], Sinv[k], niw_x[k], mean[k], C[k], nig_x[k]
                )
            else:
                logp[k] = -np.inf
                if empty < 0:
                    empty = k
            if logp[k] > mx:
                mx = logp[k]
        logp[K] = log_alpha + log_m0[i]
        if logp[K] > mx:
            mx = logp[K]
        tot = 0.0
        for k in range(K + 1):
            logp[k] = math.exp(logp[k] - mx)
            tot += logp[k]
        target = u[i] * tot
        acc = 0.0
        choice = K
        for k in range(K + 1):
            if logp[k] > 0.0:
                acc += logp[k]
                choice = k
                if acc >= target:
                    break
        if choice == K:
            choice = empty
        z[i] = choice
        _move(i, choice, 1.0, X, D, y, counts, sx, sxx, XtX, Xty, yy)
        _refresh(choice, X, D, y, counts, sx, sxx, XtX, Xty, yy, pri, loc, Sinv, niw_x, mean, C, nig_x)


# ---------------------------------------------------------------------------
# python-side sampler
# ---------------------------------------------------------------------------

def cluster_stats(X, y, labels, K=None) -> dict:
    """Sufficient statistics per cluster for contiguous ``labels``."""
    X = np.atleast_2d(X)
    D = regression_design(X)
    labels = np.asarray(labels, dtype=int)
    K = int(labels.max()) + 1 if K is None else K
    Z = np.zeros((labels.size, K))
    Z[np.arange(labels.size), labels] = 1.0
    return {
        "counts": Z.sum(axis=0),
        "sx": Z.T @ X,
        "sxx": np.einsum("ik,ia,ib->kab", Z, X, X),
        "XtX": np.einsum("ik,ia,ib->kab", Z, D, D),
        "Xty": Z.T @ (D * y[:, None]),
        "yy": Z.T @ (y * y),
    }


def relabel(z: np.ndarray) -> np.ndarray:
    """Contiguous labels in order of first appearance."""
    _, first, inv = np.unique(z, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv]


def cluster_posteriors(prior: JointDPPrior, stats: dict, k: int) -> tuple[NIWParams, NIGParams]:
    """Closed-form posteriors of cluster k from its sufficient statistics."""
    niw, nig = prior.covariates, prior.regression
    c = float(stats["counts"][k])
    if c == 0:
        return niw, nig
    kn = niw.kappa + c
    mn = (niw.kappa * niw.mean + stats["sx"][k]) / kn
    S = niw.scale + stats["sxx"][k] + niw.kappa * np.outer(niw.mean, niw.mean) - kn * np.outer(mn, mn)
    post_x = NIWParams(mn, kn, niw.df + c, 0.5 * (S + S.T))
    P0 = nig.precision
    Pn = P0 + stats["XtX"][k]
    Pn = 0.5 * (Pn + Pn.T)
    mean = np.linalg.solve(Pn, P0 @ nig.mean + stats["Xty"][k])
    bn = nig.b + 0.5 * (stats["yy"][k] + nig.mean @ P0 @ nig.mean - mean @ Pn @ mean)
    post_y = NIGParams(mean, Pn, nig.a + 0.5 * c, max(bn, nig.b * 1e-12), True)
    return post_x, post_y


class JointDPSampler:
    def __init__(self, dataset: Dataset, prior: JointDPPrior):
        if dataset.n < 2:
            raise ParameterError("the joint DP sampler needs at least two observations")
        self.prior = prior
        self.X = np.ascontiguousarray(dataset.X, dtype=float)
        self.D = regression_design(self.X)
        self.y = np.ascontiguousarray(dataset.y, dtype=float)
        self.n, self.p = self.X.shape
        self.Q = self.D.shape[1]
        if prior.covariates.dim != self.p or prior.regression.dim != self.Q:
            raise ParameterError("joint DP prior dimensions do not match the data")
        if not prior.alpha > 0:
            raise ParameterError("alpha must be positive")
        self.log_alpha = float(np.log(prior.alpha))
        niw, nig = prior.covariates, prior.regression
        P0 = np.ascontiguousarray(nig.precision)
        self._pri = (
            niw.mean.copy(), float(niw.kappa), float(niw.df), niw.scale.copy(),
            P0, P0 @ nig.mean, float(nig.mean @ P0 @ nig.mean), float(nig.a), float(nig.b),
        )
        n, p, Q = self.n, self.p, self.Q
        self.counts = np.zeros(n)
        self.sx = np.zeros((n, p))
        self.sxx = np.zeros((n, p, p))
        self.XtX = np.zeros((n, Q, Q))
        self.Xty = np.zeros((n, Q))
        self.yy = np.zeros(n)
        self.loc = np.zeros((n, p))
        self.Sinv = np.zeros((n, p, p))
        self.niw_x = np.zeros((n, 3))
        self.mean = np.zeros((n, Q))
        self.C = np.zeros((n, Q, Q))
        self.nig_x = np.zeros((n, 3))
        self.log_m0 = self._prior_predictive()
        self.z = np.zeros(n, dtype=np.int64)
        self._sweeps = 0
        self._load(self.z)

    def _prior_predictive(self) -> np.ndarray:
        loc = np.zeros((1, self.p))
        Sinv = np.zeros((1, self.p, self.p))
        nx = np.zeros((1, 3))
        mean = np.zeros((1, self.Q))
        C = np.zeros((1, self.Q, self.Q))
        gx = np.zeros((1, 3))
        zero = np.zeros(1)
        _refresh(0, self.X, self.D, self.y, zero, np.zeros((1, self.p)), np.zeros((1, self.p, self.p)),
                 np.zeros((1, self.Q, self.Q)), np.zeros((1, self.Q)), zero.copy(), self._pri,
                 loc, Sinv, nx, mean, C, gx)
        out = np.array([
            _log_pred(self.X[i], self.D[i], self.y[i], loc[0], Sinv[0], nx[0], mean[0], C[0], gx[0])
            for i in range(self.n)
        ])
        if not np.all(np.isfinite(out)):
            raise NumericError("non-finite prior predictive for the joint DP")
        return out

    def _load(self, z):
        """Set the partition and rebuild every cache."""
        self.z = np.asarray(z, dtype=np.int64).copy()
        st = cluster_stats(self.X, self.y, self.z, K=self.n)
        self.counts[:] = st["counts"]
        self.sx[:] = st["sx"]
        self.sxx[:] = st["sxx"]
        self.XtX[:] = st["XtX"]
        self.Xty[:] = st["Xty"]
        self.yy[:] = st["yy"]
        for k in np.flatnonzero(self.counts > 0):
            self._refresh(k)

    def _refresh(self, k):
        _refresh(int(k), self.X, self.D, self.y, self.counts, self.sx, self.sxx, self.XtX, self.Xty,
                 self.yy, self._pri, self.loc, self.Sinv, self.niw_x, self.mean, self.C, self.nig_x)

    def allocation_conditional(self, i: int, labels=None) -> tuple[np.ndarray, np.ndarray]:
        """p(s_i = . | s_{-i}, data): (cluster labels of the others, probabilities), last entry = new cluster."""
        if labels is not None:
            self._load(labels)
        k_old = int(self.z[i])
        _move(i, k_old, -1.0, self.X, self.D, self.y, self.counts, self.sx, self.sxx, self.XtX, self.Xty, self.yy)
        if self.counts[k_old] > 0.5:
            self._refresh(k_old)
        live = np.flatnonzero(self.counts > 0.5)
        lp = np.array([
            np.log(self.counts[k]) + _log_pred(self.X[i], self.D[i], self.y[i], self.loc[k], self.Sinv[k],
                                               self.niw_x[k], self.mean[k], self.C[k], self.nig_x[k])
            for k in live
        ] + [self.log_alpha + self.log_m0[i]])
        _move(i, k_old, 1.0, self.X, self.D, self.y, self.counts, self.sx, self.sxx, self.XtX, self.Xty, self.yy)
        self._refresh(k_old)
        prob = np.exp(lp - lp.max())
        return live, prob / prob.sum()

    def initialize(self, rng):
        self._load(np.zeros(self.n, dtype=np.int64))

    def sweep(self, rng, adapt: bool = False):
        self._sweeps += 1
        if self._sweeps % RESYNC_EVERY == 0:
            # recompute sums from scratch so incremental round-off cannot accumulate
            self._load(self.z)
        u = rng.random(self.n)
        _sweep(self.z, u, self.X, self.D, self.y, self.log_alpha, self.log_m0, self.counts, self.sx,
               self.sxx, self.XtX, self.Xty, self.yy, self._pri, self.loc, self.Sinv, self.niw_x,
               self.mean, self.C, self.nig_x)
        if not np.all(np.isfinite(self.nig_x[self.counts > 0, :2])):
            raise NumericError("non-finite cluster posterior in the joint DP sweep")

    def draw(self) -> Draw:
        labels = relabel(self.z)
        # cluster statistics re-indexed to the contiguous labels
        live = np.empty(labels.max() + 1, dtype=int)
        live[labels] = self.z
        clusters = {
            "counts": self.counts[live].copy(),
            "sx": self.sx[live].copy(),
            "sxx": self.sxx[live].copy(),
            "XtX": self.XtX[live].copy(),
            "Xty": self.Xty[live].copy(),
            "yy": self.yy[live].copy(),
        }
        return Draw(allocations=labels, clusters=clusters)

    def diagnostics(self) -> dict:
        return {"n_clusters_final": int(np.sum(self.counts > 0.5))}
