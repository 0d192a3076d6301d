import numpy as np
import pytest
from scipy import stats as st
from scipy.integrate import trapezoid

from depmix.errors import NumericError, ParameterError
from depmix.stats import (
    NIGParams,
    NIWParams,
    RngStream,
    nig_posterior,
    niw_marginal_density,
    niw_posterior,
    normal_logpdf,
    polya_gamma_mean,
    safe_cholesky,
    sample_beta,
    sample_categorical,
    sample_dirichlet,
    sample_gamma,
    sample_mvn,
    sample_nig,
    sample_polya_gamma,
    sample_polya_gamma_1,
    sample_polya_gamma_b,
    sample_wishart,
    student_t_logpdf,
    student_t_predictive,
)

N_MC = 100_000


def pg_series_moments(c, terms=2_000_000):
    """Mean and variance of PG(1, c) from its infinite sum-of-gammas representation."""
    k = np.arange(1, terms + 1)
    d = (k - 0.5) ** 2 + c**2 / (4 * np.pi**2)
    return (1 / (2 * np.pi**2)) * np.sum(1 / d), (1 / (4 * np.pi**4)) * np.sum(1 / d**2)


# ---------------------------------------------------------------- rng streams

def test_rng_stream_reproducible():
    a = RngStream(42, 3).generator().standard_normal(50)
    b = RngStream(42, 3).generator().standard_normal(50)
    assert np.array_equal(a, b)


def test_rng_streams_differ():
    a = RngStream(42, 0).generator().standard_normal(50)
    b = RngStream(42, 1).generator().standard_normal(50)
    c = RngStream(42, 0).child(0).generator().standard_normal(50)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------- basic samplers

def test_dirichlet_single_and_normalized(rng):
    assert np.array_equal(sample_dirichlet([3.0], rng), [1.0])
    for _ in range(200):
        w = sample_dirichlet([1.0, 1.0], rng)
        assert abs(w.sum() - 1) < 1e-12 and np.all(w >= 0)


def test_dirichlet_mean(rng):
    draws = np.array([sample_dirichlet([2.0, 2.0], rng)[0] for _ in range(N_MC // 10)])
    assert abs(draws.mean() - 0.5) < 0.01


def test_dirichlet_tiny_parameters_still_simplex(rng):
    for _ in range(100):
        w = sample_dirichlet(np.full(20, 0.05), rng)
        assert np.isfinite(w).all() and abs(w.sum() - 1) < 1e-12


def test_dirichlet_rejects_nonpositive(rng):
    with pytest.raises(ParameterError):
        sample_dirichlet([1.0, 0.0], rng)


def test_mvn_moments(rng):
    X = np.array([sample_mvn(np.zeros(2), np.eye(2), rng) for _ in range(20_000)])
    assert np.all(np.abs(X.mean(axis=0)) < 0.02 * np.sqrt(5))  # 3 sigma at 2e4 draws
    assert abs(np.corrcoef(X.T)[0, 1]) < 3 / np.sqrt(20_000)


def test_mvn_degenerate_limit(rng):
    m = np.array([1.0, -2.0])
    x = sample_mvn(m, 1e-14 * np.eye(2), rng)
    assert np.allclose(x, m, atol=1e-5)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NumericError):
        safe_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_cholesky_jitter_rescues_semidefinite():
    L = safe_cholesky(np.ones((2, 2)))
    assert np.allclose(L @ L.T, np.ones((2, 2)), atol=1e-5)


def test_beta_and_gamma_moments(rng):
    b = sample_beta(1.0, 1.0, rng, size=N_MC)
    assert abs(b.mean() - 0.5) < 0.01
    g = sample_gamma(3.0, 2.0, rng, size=N_MC)
    assert abs(g.mean() - 1.5) < 3 * np.sqrt(3.0 / 4.0 / N_MC)
    with pytest.raises(ParameterError):
        sample_gamma(0.0, 1.0, rng)
    with pytest.raises(ParameterError):
        sample_beta(1.0, -1.0, rng)


def test_categorical(rng):
    assert all(sample_categorical([1.0, 0.0, 0.0], rng) == 0 for _ in range(100))
    with pytest.raises(ParameterError):
        sample_categorical([0.5, 0.2], rng)


@pytest.mark.parametrize("p", [1, 3])
def test_wishart_mean(rng, p):
    df = p + 2.0
    W = np.mean([sample_wishart(df, np.eye(p), rng) for _ in range(20_000)], axis=0)
    assert np.allclose(W, df * np.eye(p), atol=0.05 * df)


def test_wishart_rejects_small_df(rng):
    with pytest.raises(ParameterError):
        sample_wishart(1.5, np.eye(3), rng)


# ---------------------------------------------------------------- Polya-Gamma

def test_pg_series_oracle_matches_closed_form():
    # the series oracle and tanh(c/2)/(2c) agree, so both can be trusted below
    for c in (0.1, 1.0, 2.0, 5.0):
        m, _ = pg_series_moments(c)
        assert abs(m - np.tanh(c / 2) / (2 * c)) < 1e-6
        assert abs(polya_gamma_mean(c) - m) < 1e-6


@pytest.mark.parametrize("c", [0.1, 1.0, 2.0, 5.0])
def test_pg_mean_within_three_standard_errors(c):
    draws = sample_polya_gamma(np.full(N_MC, c), np.random.default_rng(int(c * 1000)))
    m, v = pg_series_moments(c)
    assert np.all(draws > 0)
    assert abs(draws.mean() - m) < 3 * np.sqrt(v / N_MC)
    # variance: 3 standard errors of the sample variance are well below 5%
    assert abs(draws.var() / v - 1) < 0.05


def test_pg_mean_at_zero_and_two(rng):
    assert abs(sample_polya_gamma(np.zeros(N_MC), rng).mean() - 0.25) < 0.005
    assert abs(sample_polya_gamma(np.full(N_MC, 2.0), rng).mean() - np.tanh(1) / 4) < 0.005
    assert abs(np.tanh(1) / 4 - 0.19040) < 1e-5


def test_pg_symmetric_in_c(rng):
    a = sample_polya_gamma(np.full(20_000, 1.5), rng)
    b = sample_polya_gamma(np.full(20_000, -1.5), rng)
    assert st.ks_2samp(a, b).pvalue > 0.01


def test_pg_scalar_and_integer_shape(rng):
    assert sample_polya_gamma_1(0.3, rng) > 0
    d = sample_polya_gamma_b(3, np.full(20_000, 1.0), rng)
    m, v = pg_series_moments(1.0)
    assert abs(d.mean() - 3 * m) < 3 * np.sqrt(3 * v / 20_000)
    with pytest.raises(ParameterError):
        sample_polya_gamma(np.array([np.inf]), rng)


# ---------------------------------------------------------------- NIG

def test_nig_no_data_returns_prior():
    prior = NIGParams(np.array([0.5]), np.array([[2.0]]), 3.0, 2.0)
    assert nig_posterior(prior, np.zeros((0, 1)), np.zeros(0)) is prior


def test_nig_dimension_mismatch():
    prior = NIGParams(np.zeros(2), np.eye(2), 2.0, 1.0)
    with pytest.raises(ParameterError):
        nig_posterior(prior, np.ones((3, 2)), np.ones(4))


def test_nig_grid_quadrature():
    m0, k0, a0, b0 = 0.5, 2.0, 3.0, 2.0
    y = np.array([1.2, 0.4, 2.1])
    post = nig_posterior(NIGParams(np.array([m0]), np.array([[k0]]), a0, b0), np.ones((3, 1)), y)

    # unnormalized posterior in (beta, tau = 1 / sigma^2) on a fine grid
    beta = np.linspace(-4, 5, 1801)
    tau = np.linspace(1e-6, 8, 2001)
    B, T = np.meshgrid(beta, tau, indexing="ij")
    logp = (
        (a0 - 1) * np.log(T) - b0 * T
        + 0.5 * np.log(T) - 0.5 * k0 * T * (B - m0) ** 2
        + 1.5 * np.log(T) - 0.5 * T * ((y[None, None, :] - B[..., None]) ** 2).sum(-1)
    )
    p = np.exp(logp - logp.max())
    Z = trapezoid(trapezoid(p, tau, axis=1), beta)
    E = lambda f: trapezoid(trapezoid(f * p, tau, axis=1), beta) / Z  # noqa: E731
    e_beta, e_tau = E(B), E(T)
    v_tau, v_beta = E(T**2) - e_tau**2, E(B**2) - e_beta**2
    shape, rate = e_tau**2 / v_tau, e_tau / v_tau
    precision = rate / ((shape - 1) * v_beta)

    assert abs(post.mean[0] - e_beta) < 1e-3
    assert abs(post.a - shape) < 1e-3
    assert abs(post.b - rate) < 1e-3
    assert abs(post.precision[0, 0] - precision) < 1e-3


def test_nig_order_invariance(rng):
    prior = NIGParams(np.array([0.1, -0.2]), np.diag([0.5, 2.0]), 2.0, 1.5)
    X = np.column_stack([np.ones(30), rng.normal(size=30)])
    y = X @ [1.0, 0.5] + rng.normal(size=30)
    seq = nig_posterior(nig_posterior(prior, X[:12], y[:12]), X[12:], y[12:])
    once = nig_posterior(prior, X, y)
    assert np.allclose(seq.mean, once.mean, atol=1e-10)
    assert np.allclose(seq.precision, once.precision, atol=1e-10)
    assert abs(seq.a - once.a) < 1e-10 and abs(seq.b - once.b) < 1e-10


def test_nig_dogmatic_prior():
    prior = NIGParams(np.array([3.0]), np.array([[1e12]]), 2.0, 1.0)
    post = nig_posterior(prior, np.ones((5, 1)), np.array([-10.0, 4, 8, 1, 0]))
    assert abs(post.mean[0] - 3.0) < 1e-8


def test_nig_covariance_form_equivalent():
    C = np.array([[2.0, 0.3], [0.3, 1.0]])
    a = NIGParams(np.zeros(2), C, 2.0, 1.0, is_precision=False)
    b = NIGParams(np.zeros(2), np.linalg.inv(C), 2.0, 1.0, is_precision=True)
    assert np.allclose(a.precision, b.precision)
    assert np.allclose(a.as_precision().matrix, b.matrix)


def test_nig_validation():
    with pytest.raises(ParameterError):
        NIGParams(np.zeros(2), np.eye(2), 0.0, 1.0)
    with pytest.raises(ParameterError):
        NIGParams(np.zeros(2), np.eye(3), 1.0, 1.0)
    with pytest.raises(ParameterError):
        NIGParams(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]), 1.0, 1.0)


# ---------------------------------------------------------------- Student-t predictive

def test_student_t_predictive_vs_monte_carlo():
    post = nig_posterior(NIGParams(np.array([0.0]), np.array([[1.0]]), 2.0, 1.0), np.ones((4, 1)),
                         np.array([0.3, -0.4, 1.1, 0.8]))
    loc, scale, df = student_t_predictive(post, [1.0])
    g = np.random.default_rng(99)
    ys = np.empty(N_MC)
    for i in range(N_MC):
        b, s2 = sample_nig(post, g)
        ys[i] = b[0] + np.sqrt(s2) * g.standard_normal()
    assert st.kstest(ys, st.t(df, loc, scale).cdf).statistic < 0.02


def test_student_t_large_df_is_normal():
    y = np.linspace(-4, 4, 41)
    assert np.allclose(np.exp(student_t_logpdf(y, 0.5, 1.3, 1e9)), np.exp(normal_logpdf(y, 0.5, 1.3**2)), atol=1e-4)


def test_student_t_symmetric_and_normalized():
    assert abs(student_t_logpdf(1.7 + 0.4, 1.7, 0.9, 5) - student_t_logpdf(1.7 - 0.4, 1.7, 0.9, 5)) < 1e-14
    g = np.linspace(-400, 400, 400_001)
    assert abs(trapezoid(np.exp(student_t_logpdf(g, 0.0, 1.0, 4.0)), g) - 1) < 1e-3


# ---------------------------------------------------------------- NIW

def test_niw_no_data_and_mismatch():
    prior = NIWParams(np.zeros(2), 0.5, 4.0, np.eye(2))
    assert niw_posterior(prior, np.zeros((0, 2))) is prior
    with pytest.raises(ParameterError):
        niw_posterior(prior, np.ones((3, 3)))
    with pytest.raises(ParameterError):
        NIWParams(np.zeros(2), 0.5, 0.5, np.eye(2))


def test_niw_marginal_integrates_to_one():
    post = niw_posterior(NIWParams(np.array([1.0]), 0.1, 3.0, np.array([[2.0]])), np.array([[0.2], [1.4], [2.2]]))
    g = np.linspace(-200, 200, 400_001)
    assert abs(trapezoid(niw_marginal_density(post, g), g) - 1) < 1e-3


def test_niw_marginal_mode_at_mean():
    prior = NIWParams(np.array([1.0]), 0.1, 3.0, np.array([[2.0]]))
    g = np.linspace(-3, 5, 801)
    assert abs(g[np.argmax(niw_marginal_density(prior, g))] - 1.0) < 1e-9


def test_niw_marginal_vs_grid_quadrature():
    """Posterior predictive of one new x from a grid over (mu, sigma^2), p = 1."""
    prior = NIWParams(np.array([0.0]), 0.5, 3.0, np.array([[1.5]]))
    X = np.array([[0.4], [1.1], [-0.3]])
    x_new = 0.8
    post = niw_posterior(prior, X)
    mu = np.linspace(-6, 6, 1201)
    s2 = np.linspace(1e-3, 30, 3000)
    M, S = np.meshgrid(mu, s2, indexing="ij")
    # NIW(p=1): sigma^2 ~ IG(df/2, scale/2), mu | sigma^2 ~ N(m, sigma^2 / kappa)
    logp = (
        -(prior.df / 2 + 1) * np.log(S) - prior.scale[0, 0] / (2 * S)
        - 0.5 * np.log(S) - prior.kappa * (M - prior.mean[0]) ** 2 / (2 * S)
        + sum(-0.5 * np.log(S) - (x - M) ** 2 / (2 * S) for x in X[:, 0])
    )
    w = np.exp(logp - logp.max())
    lik = np.exp(-0.5 * np.log(2 * np.pi * S) - (x_new - M) ** 2 / (2 * S))
    num = trapezoid(trapezoid(w * lik, s2, axis=1), mu)
    den = trapezoid(trapezoid(w, s2, axis=1), mu)
    assert abs(num / den - niw_marginal_density(post, [x_new])) < 1e-3


def test_niw_order_invariance(rng):
    prior = NIWParams(np.zeros(2), 0.3, 4.0, np.eye(2))
    X = rng.normal(size=(25, 2))
    seq = niw_posterior(niw_posterior(prior, X[:10]), X[10:])
    once = niw_posterior(prior, X)
    assert np.allclose(seq.mean, once.mean, atol=1e-10)
    assert np.allclose(seq.scale, once.scale, atol=1e-10)
    assert abs(seq.kappa - once.kappa) < 1e-10 and abs(seq.df - once.df) < 1e-10
