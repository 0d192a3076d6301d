import numpy as np
import pytest
from scipy import stats as sps
from scipy.integrate import trapezoid

from depmix.errors import ParameterError
from depmix.simstudy import (
    DEFAULT_N,
    N_TEST,
    coverage_and_length,
    generate_example,
    l1_density_error,
    rmse_regression,
    test_points,
    true_density,
    true_mean,
    true_sd,
    truth,
)


def test_example_1_mean_at_zero():
    assert true_mean(1, np.array([[0.0, 0.0]]))[0] == pytest.approx(5 - np.log(2), abs=1e-12)
    assert true_mean(1, np.array([[0.0, 0.0]]))[0] == pytest.approx(4.30685, abs=1e-5)


def test_example_2_pieces():
    assert true_mean(2, np.array([3.0]))[0] == 2.0
    assert true_sd(2, np.array([3.0]))[0] == 0.05
    assert true_sd(2, np.array([6.0]))[0] ** 2 == pytest.approx(1 / 15 + 0.01, rel=1e-12)
    assert true_sd(2, np.array([6.0]))[0] ** 2 == pytest.approx(0.07667, abs=1e-5)
    np.testing.assert_array_equal(true_mean(2, np.array([-1.0, 2.0, 5.0, 9.0])), [0.0, 0.0, 6.0, 6.0])
    # boundaries take the left segment's sd
    np.testing.assert_allclose(true_sd(2, np.array([2.0, 5.0])), [0.2, 0.05])


def test_example_3_sign_rule():
    assert true_mean(3, np.array([[1.0, 1.0]]))[0] == -1.0
    assert true_mean(3, np.array([[1.0, -1.0]]))[0] == 1.0
    assert true_mean(3, np.array([[0.0, 1.5]]))[0] == 1.0  # sin(0) = 0 <= 0


def test_example_3_density_mode():
    d = true_density(3, np.array([[1.0, 1.0]]), np.array([-1.0]))
    assert d[0, 0] == pytest.approx(1 / (0.1 * np.sqrt(2 * np.pi)), rel=1e-12)
    assert d[0, 0] == pytest.approx(3.989, abs=1e-3)


@pytest.mark.parametrize("example", [1, 2, 3])
def test_true_density_integrates_to_one(example):
    x = truth(example).sample_covariates(50, np.random.default_rng(example))
    m, s = true_mean(example, x), true_sd(example, x)
    for k in range(50):
        grid = np.linspace(m[k] - 10 * s[k], m[k] + 10 * s[k], 4001)
        f = true_density(example, x[k : k + 1], grid)[0]
        assert trapezoid(f, grid) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("example", [1, 2, 3])
def test_generation_is_reproducible_and_sized(example):
    a = generate_example(example, seed=5)
    b = generate_example(example, seed=5)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.X, b.X)
    assert a.n == DEFAULT_N[example]
    assert not np.array_equal(a.y, generate_example(example, seed=6).y)


def _mean_zscores(example, col, mu, var, n=2000, seeds=range(50)):
    return [(generate_example(example, n=n, seed=s).X[:, col].mean() - mu) / np.sqrt(var / n) for s in seeds]


@pytest.mark.parametrize("example,col,mu,var", [(1, 0, 3.5, 81 / 12), (2, 0, 4.0, 144 / 12),
                                                (3, 0, 0.0, 16 / 12), (3, 1, 0.0, 16 / 12)])
def test_covariate_means_match_the_laws(example, col, mu, var):
    # standardized sample means across independent seeds are N(0, 1)
    assert sps.kstest(_mean_zscores(example, col, mu, var), "norm").pvalue > 1e-3


def test_covariate_supports_and_curve():
    d1 = generate_example(1, n=20_000, seed=1)
    x1 = d1.X[:, 0]
    assert x1.min() >= -1 and x1.max() <= 8
    resid = d1.X[:, 1] - ((x1 - 3.5) ** 2 / 3 - 1)
    assert sps.kstest(resid / 0.05, "norm").pvalue > 1e-3
    assert np.all(np.abs(generate_example(3, n=5000, seed=1).X) <= 2)
    x2 = generate_example(2, n=5000, seed=1).X
    assert x2.min() >= -2 and x2.max() <= 10


def test_noise_matches_truth():
    d = generate_example(2, n=40_000, seed=2)
    z = (d.y - true_mean(2, d.X)) / true_sd(2, d.X)
    assert sps.kstest(z, "norm").pvalue > 1e-3


def test_invalid_example_and_n():
    with pytest.raises(ParameterError):
        generate_example(4)
    with pytest.raises(ParameterError):
        generate_example(1, n=0)


def test_test_points_fixed_and_on_covariate_law():
    a, b = test_points(1), test_points(1)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (N_TEST, 2)
    assert test_points(2).shape == (N_TEST, 1)
    # Example 1 test points sit on the curve, not a product grid
    assert np.abs(a[:, 1] - ((a[:, 0] - 3.5) ** 2 / 3 - 1)).max() < 0.3


def test_rmse_cases():
    assert rmse_regression([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse_regression(np.arange(5) + 0.3, np.arange(5)) == pytest.approx(0.3, abs=1e-12)
    assert rmse_regression([0.0, 0.0], [3.0, 4.0]) == pytest.approx(3.5355, abs=1e-4)
    with pytest.raises(ParameterError):
        rmse_regression([1.0], [1.0, 2.0])


def test_l1_cases():
    grid = np.linspace(-12, 12, 200_001)
    f0 = sps.norm.pdf(grid)[None, :]
    assert l1_density_error(f0, f0, grid) == 0.0
    f1 = sps.norm.pdf(grid, 0.5)[None, :]
    # 2 (2 Phi(delta / 2) - 1) at delta = 0.5; brute quadrature gives the same 0.39483
    from scipy.integrate import quad

    gap = lambda y: abs(sps.norm.pdf(y) - sps.norm.pdf(y, 0.5))  # noqa: E731
    oracle = quad(gap, -30, 0.25)[0] + quad(gap, 0.25, 30)[0]
    analytic = 2 * (2 * sps.norm.cdf(0.25) - 1)
    assert oracle == pytest.approx(analytic, abs=1e-10)
    assert analytic == pytest.approx(0.39483, abs=1e-5)
    assert l1_density_error(f1, f0, grid) == pytest.approx(analytic, abs=1e-3)
    far = sps.norm.pdf(grid, 10.0, 0.3)[None, :]
    near = sps.norm.pdf(grid, -10.0, 0.3)[None, :]
    assert l1_density_error(far, near, grid) == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(ParameterError):
        l1_density_error(f0, f0, grid[:-1])


def test_l1_averages_over_points():
    grid = np.linspace(-12, 22, 50_001)
    f0 = np.vstack([sps.norm.pdf(grid), sps.norm.pdf(grid)])
    f = np.vstack([sps.norm.pdf(grid), sps.norm.pdf(grid, 10)])
    assert l1_density_error(f, f0, grid) == pytest.approx(1.0, abs=1e-6)


def test_coverage_cases():
    m = np.array([0.0, 1.0, 2.0, 3.0])
    assert coverage_and_length(np.full(4, -np.inf), np.full(4, np.inf), m)[0] == 1.0
    assert coverage_and_length(m, m, m) == (1.0, 0.0)
    cov, length = coverage_and_length(m - 0.5, m + np.array([0.5, 0.5, 0.5, -0.25]), m)
    assert cov == 0.75
    assert length == pytest.approx((1 + 1 + 1 + 0.25) / 4)
    with pytest.raises(ParameterError):
        coverage_and_length(m + 1, m, m)
