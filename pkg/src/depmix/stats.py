"""Sampling primitives, conjugate updates and predictive densities.

Everything here is a pure function of its arguments plus an explicit
``numpy.random.Generator``; nothing keeps module-level random state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammaln, log_ndtr

from .errors import NumericError, ParameterError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream) pair that deterministically names a generator.

    Streams are derived through ``SeedSequence`` spawn keys, so chains started
    from one seed with different stream ids are statistically independent.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream: int) -> "RngStream":
        return RngStream(self.seed, self.stream * 1_000_003 + stream + 1)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


# ---------------------------------------------------------------------------
# linear algebra helpers
# ---------------------------------------------------------------------------

def safe_cholesky(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying with a diagonal jitter ladder.

    Jitter starts at 1e-10 * trace/p and grows tenfold up to 1e-6 * trace/p.
    """
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    p = A.shape[0]
    scale = max(np.trace(A) / p, 1e-300) if p else 1.0
    jitter = 1e-10
    while jitter <= 1e-6 * (1 + 1e-9):
        try:
            return np.linalg.cholesky(A + jitter * scale * np.eye(p))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericError("matrix is not positive definite (Cholesky failed after jitter)")


def spd_inverse(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Inverse and log-determinant of an SPD matrix."""
    L = safe_cholesky(A)
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv, 2.0 * np.sum(np.log(np.diag(L)))


# ---------------------------------------------------------------------------
# elementary samplers
# ---------------------------------------------------------------------------

def sample_dirichlet(alpha, rng) -> np.ndarray:
    """Dirichlet draw computed in log space.

    Small concentrations (e.g. alpha/J with J=20) make plain gamma draws
    underflow to zero; using Gamma(a) = Gamma(a+1) * U**(1/a) avoids that.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or alpha.size < 1:
        raise ParameterError("alpha must be a non-empty vector")
    if np.any(~(alpha > 0)):
        raise ParameterError("Dirichlet parameters must be positive")
    if alpha.size == 1:
        return np.ones(1)
    g = rng.standard_gamma(alpha + 1.0)
    logg = np.log(g) + np.log(rng.uniform(size=alpha.size)) / alpha
    logg -= logg.max()
    w = np.exp(logg)
    return w / w.sum()


def sample_mvn(mean, cov, rng) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    L = safe_cholesky(cov)
    return mean + L @ rng.standard_normal(mean.shape[0])


def sample_mvn_precision(b, precision, rng) -> np.ndarray:
    """Draw from N(P^{-1} b, P^{-1}) given the precision P and linear term b."""
    L = safe_cholesky(precision)
    mu = np.linalg.solve(L.T, np.linalg.solve(L, b))
    return mu + np.linalg.solve(L.T, rng.standard_normal(mu.shape[0]))


def sample_gamma(shape, rate, rng, size=None):
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(~(shape > 0)) or np.any(~(rate > 0)):
        raise ParameterError("gamma shape and rate must be positive")
    return rng.gamma(shape, 1.0 / rate, size=size)


def sample_beta(a, b, rng, size=None):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise ParameterError("beta parameters must be positive")
    return rng.beta(a, b, size=size)


def sample_wishart(df: float, scale, rng) -> np.ndarray:
    """Wishart(df, scale) via the Bartlett decomposition; E = df * scale."""
    scale = np.asarray(scale, dtype=float)
    p = scale.shape[0]
    if not df > p - 1:
        raise ParameterError(f"Wishart df={df} must exceed dim-1={p - 1}")
    L = safe_cholesky(scale)
    A = np.zeros((p, p))
    A[np.diag_indices(p)] = np.sqrt(rng.chisquare(df - np.arange(p)))
    A[np.tril_indices(p, -1)] = rng.standard_normal(p * (p - 1) // 2)
    LA = L @ A
    return LA @ LA.T


def sample_categorical(weights, rng) -> int:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or np.any(w < 0) or not np.isclose(w.sum(), 1.0, atol=1e-8):
        raise ParameterError("categorical weights must form a simplex")
    c = np.cumsum(w)
    return int(min(np.searchsorted(c, rng.uniform() * c[-1], side="right"), w.size - 1))


def sample_categorical_log(logp: np.ndarray, rng) -> np.ndarray:
    """One categorical draw per row of an (n, K) matrix of unnormalised log-probabilities."""
    logp = np.asarray(logp, dtype=float)
    m = logp.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(m)):
        raise NumericError("allocation probabilities are all zero or non-finite")
    p = np.exp(logp - m)
    c = np.cumsum(p, axis=1)
    u = rng.uniform(size=(logp.shape[0], 1)) * c[:, -1:]
    idx = (c <= u).sum(axis=1)
    return np.minimum(idx, logp.shape[1] - 1)


# ---------------------------------------------------------------------------
# Polya-Gamma PG(1, c): Devroye-type exact sampler with alternating series
# ---------------------------------------------------------------------------

_PG_T = 0.64


def _pg_coef(n: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Piecewise coefficients a_n(x) of the Jacobi density series."""
    k = n + 0.5
    out = np.empty_like(x)
    lo = x <= _PG_T
    xl = x[lo]
    out[lo] = np.pi * k[lo] * (2.0 / (np.pi * xl)) ** 1.5 * np.exp(-2.0 * k[lo] ** 2 / xl)
    xh = x[~lo]
    out[~lo] = np.pi * k[~lo] * np.exp(-0.5 * k[~lo] ** 2 * np.pi**2 * xh)
    return out


def _pg_exp_mass(z: np.ndarray) -> np.ndarray:
    """Probability of proposing from the right (exponential) piece."""
    t = _PG_T
    fz = np.pi**2 / 8.0 + 0.5 * z**2
    b = np.sqrt(1.0 / t) * (t * z - 1.0)
    a = -np.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = np.log(fz) + fz * t
    xb = x0 - z + log_ndtr(b)
    xa = x0 + z + log_ndtr(a)
    log_qdivp = np.log(4.0 / np.pi) + np.logaddexp(xb, xa)
    return expit(-log_qdivp)


def _pg_trunc_invgauss(z: np.ndarray, rng) -> np.ndarray:
    """Inverse-Gaussian(mean 1/z, shape 1) truncated to (0, t)."""
    t = _PG_T
    out = np.empty_like(z)
    mu = np.full_like(z, np.inf)
    pos = z > 0
    mu[pos] = 1.0 / z[pos]

    # mean beyond truncation: propose from a 1/chi^2-type tail and accept
    big = np.flatnonzero(mu > t)
    while big.size:
        m = big.size
        e1 = rng.standard_exponential(m)
        e2 = rng.standard_exponential(m)
        bad = e1**2 > 2.0 * e2 / t
        while np.any(bad):
            nb = int(bad.sum())
            e1[bad] = rng.standard_exponential(nb)
            e2[bad] = rng.standard_exponential(nb)
            bad = e1**2 > 2.0 * e2 / t
        x = t / (1.0 + t * e1) ** 2
        alpha = np.exp(-0.5 * z[big] ** 2 * x)
        ok = rng.uniform(size=m) <= alpha
        out[big[ok]] = x[ok]
        big = big[~ok]

    small = np.flatnonzero(mu <= t)
    while small.size:
        m = small.size
        mus = mu[small]
        y = rng.standard_normal(m) ** 2
        x = mus + 0.5 * mus**2 * y - 0.5 * mus * np.sqrt(4.0 * mus * y + (mus * y) ** 2)
        flip = rng.uniform(size=m) > mus / (mus + x)
        x[flip] = mus[flip] ** 2 / x[flip]
        ok = x <= t
        out[small[ok]] = x[ok]
        small = small[~ok]
    return out


def sample_polya_gamma(c, rng) -> np.ndarray:
    """Exact PG(1, c) draws, vectorised over ``c``.

    Proposals come from a truncated inverse Gaussian / exponential mixture and
    are accepted by the alternating-series test, so there is no truncation bias.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if not np.all(np.isfinite(c)):
        raise ParameterError("Polya-Gamma tilt must be finite")
    z = 0.5 * np.abs(c).ravel()
    out = np.empty_like(z)
    todo = np.arange(z.size)
    while todo.size:
        zz = z[todo]
        fz = np.pi**2 / 8.0 + 0.5 * zz**2
        use_exp = rng.uniform(size=todo.size) < _pg_exp_mass(zz)
        x = np.empty_like(zz)
        ne = int(use_exp.sum())
        x[use_exp] = _PG_T + rng.standard_exponential(ne) / fz[use_exp]
        if ne < todo.size:
            x[~use_exp] = _pg_trunc_invgauss(zz[~use_exp], rng)

        s = _pg_coef(np.zeros_like(x), x)
        y = rng.uniform(size=x.size) * s
        n = 0
        undecided = np.ones(x.size, dtype=bool)
        accepted = np.zeros(x.size, dtype=bool)
        while np.any(undecided):
            n += 1
            idx = np.flatnonzero(undecided)
            a = _pg_coef(np.full(idx.size, float(n)), x[idx])
            if n % 2:
                s[idx] -= a
                hit = y[idx] <= s[idx]
                accepted[idx[hit]] = True
                undecided[idx[hit]] = False
            else:
                s[idx] += a
                miss = y[idx] > s[idx]
                undecided[idx[miss]] = False
        out[todo[accepted]] = 0.25 * x[accepted]
        todo = todo[~accepted]
    return out.reshape(np.shape(c))


def sample_polya_gamma_1(c: float, rng) -> float:
    return float(sample_polya_gamma(np.array([c]), rng)[0])


def sample_polya_gamma_b(b: int, c, rng) -> np.ndarray:
    """PG(b, c) for integer b as a sum of b independent PG(1, c) draws."""
    if int(b) != b or b < 1:
        raise ParameterError("PG shape must be a positive integer")
    c = np.asarray(c, dtype=float)
    return sum(sample_polya_gamma(c, rng) for _ in range(int(b)))


def polya_gamma_mean(c) -> np.ndarray:
    """E[PG(1, c)] = tanh(c/2) / (2c), with limit 1/4 at c = 0."""
    c = np.abs(np.asarray(c, dtype=float))
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.tanh(0.5 * c) / (2.0 * c)
    return np.where(c < 1e-8, 0.25 - c**2 / 48.0, m)


# ---------------------------------------------------------------------------
# normal-inverse-gamma regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NIGParams:
    """beta | sigma^2 ~ N(mean, sigma^2 * C), 1/sigma^2 ~ Gamma(a, rate=b).

    ``matrix`` is C^{-1} when ``is_precision`` is true, otherwise C.
    """

    mean: np.ndarray
    matrix: np.ndarray
    a: float
    b: float
    is_precision: bool = True

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        M = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "matrix", M)
        if M.shape != (m.size, m.size):
            raise ParameterError("NIG matrix must be Q x Q with Q = len(mean)")
        if not (self.a > 0 and self.b > 0):
            raise ParameterError("NIG shape and rate must be positive")
        if not np.allclose(M, M.T, rtol=1e-8, atol=1e-12 * max(1.0, np.abs(M).max())):
            raise ParameterError("NIG matrix must be symmetric")

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def precision(self) -> np.ndarray:
        return self.matrix if self.is_precision else spd_inverse(self.matrix)[0]

    @property
    def cov(self) -> np.ndarray:
        return spd_inverse(self.matrix)[0] if self.is_precision else self.matrix

    def as_precision(self) -> "NIGParams":
        if self.is_precision:
            return self
        return NIGParams(self.mean, self.precision, self.a, self.b, True)


@dataclass(frozen=True)
class NormalGammaParams:
    """Independent prior beta ~ N(mean, cov), 1/sigma^2 ~ Gamma(a, rate=b) (semi-conjugate)."""

    mean: np.ndarray
    cov: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        C = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", C)
        if C.shape != (m.size, m.size):
            raise ParameterError("covariance must be Q x Q with Q = len(mean)")
        if not (self.a > 0 and self.b > 0):
            raise ParameterError("gamma shape and rate must be positive")
        safe_cholesky(C)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def precision(self) -> np.ndarray:
        return spd_inverse(self.cov)[0]


def nig_posterior(prior: NIGParams, X, y) -> NIGParams:
    X = np.asarray(X, dtype=float).reshape(-1, prior.dim)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ParameterError("X rows and y length differ")
    if y.size == 0:
        return prior
    P0 = prior.precision
    m0 = prior.mean
    Pn = P0 + X.T @ X
    Pn = 0.5 * (Pn + Pn.T)
    L = safe_cholesky(Pn)
    rhs = P0 @ m0 + X.T @ y
    mn = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
    an = prior.a + 0.5 * y.size
    bn = prior.b + 0.5 * (y @ y + m0 @ P0 @ m0 - mn @ Pn @ mn)
    # guard against cancellation when the residual is essentially zero
    bn = max(bn, prior.b * 1e-12)
    return NIGParams(mn, Pn, an, bn, True)


def sample_nig(params: NIGParams, rng) -> tuple[np.ndarray, float]:
    prec = rng.gamma(params.a, 1.0 / params.b)
    sigma2 = 1.0 / prec
    P = params.precision / sigma2
    beta = sample_mvn_precision(P @ params.mean, P, rng)
    return beta, sigma2


def student_t_predictive(post: NIGParams, xtilde) -> tuple[float, float, float]:
    """(location, scale, df) of the marginal predictive of y at design row ``xtilde``."""
    xt = np.asarray(xtilde, dtype=float).ravel()
    C = post.cov
    loc = float(xt @ post.mean)
    scale = float(np.sqrt(post.b / post.a * (1.0 + xt @ C @ xt)))
    return loc, scale, 2.0 * post.a


def student_t_logpdf(y, loc, scale, df):
    y = np.asarray(y, dtype=float)
    z = (y - loc) / scale
    return (
        gammaln(0.5 * (df + 1.0))
        - gammaln(0.5 * df)
        - 0.5 * np.log(df * np.pi)
        - np.log(scale)
        - 0.5 * (df + 1.0) * np.log1p(z * z / df)
    )


def normal_logpdf(y, mean, var):
    y = np.asarray(y, dtype=float)
    return -0.5 * (LOG_2PI + np.log(var) + (y - mean) ** 2 / var)


# ---------------------------------------------------------------------------
# normal-inverse-Wishart for the covariate part of the joint model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NIWParams:
    mean: np.ndarray
    kappa: float
    df: float
    scale: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        S = np.atleast_2d(np.asarray(self.scale, dtype=float))
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "scale", S)
        p = m.size
        if S.shape != (p, p):
            raise ParameterError("NIW scale must be p x p")
        if not self.kappa > 0:
            raise ParameterError("NIW kappa must be positive")
        if not self.df > p - 1:
            raise ParameterError("NIW df must exceed p-1")
        safe_cholesky(S)

    @property
    def dim(self) -> int:
        return self.mean.size


def niw_posterior(prior: NIWParams, X) -> NIWParams:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, prior.dim) if prior.dim > 1 or X.size == 0 else X[:, None]
    if X.shape[1] != prior.dim:
        raise ParameterError("covariate dimension does not match the NIW prior")
    n = X.shape[0]
    if n == 0:
        return prior
    xbar = X.mean(axis=0)
    R = X - xbar
    kn = prior.kappa + n
    d = xbar - prior.mean
    scale = prior.scale + R.T @ R + (prior.kappa * n / kn) * np.outer(d, d)
    mean = (prior.kappa * prior.mean + n * xbar) / kn
    return NIWParams(mean, kn, prior.df + n, 0.5 * (scale + scale.T))


def niw_marginal_t(params: NIWParams) -> tuple[np.ndarray, np.ndarray, float]:
    """Location, shape matrix and df of the multivariate-t predictive for x."""
    p = params.dim
    dof = params.df - p + 1.0
    shape = params.scale * (params.kappa + 1.0) / (params.kappa * dof)
    return params.mean, shape, dof


def mvt_logpdf(X, loc, shape, df):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = loc.size
    if X.shape[1] != p:
        X = X.reshape(-1, p)
    Sinv, logdet = spd_inverse(shape)
    R = X - loc
    q = np.einsum("ij,jk,ik->i", R, Sinv, R)
    return (
        gammaln(0.5 * (df + p))
        - gammaln(0.5 * df)
        - 0.5 * p * np.log(df * np.pi)
        - 0.5 * logdet
        - 0.5 * (df + p) * np.log1p(q / df)
    )


def niw_marginal_density(params: NIWParams, x) -> float | np.ndarray:
    """Density of the multivariate-t obtained by integrating the NIW.

    A single p-vector gives a float; an (m, p) array gives m values.
    """
    loc, shape, dof = niw_marginal_t(params)
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1 and x.size == params.dim:
        return float(np.exp(mvt_logpdf(x.reshape(1, -1), loc, shape, dof))[0])
    return np.exp(mvt_logpdf(x.reshape(-1, params.dim), loc, shape, dof))
