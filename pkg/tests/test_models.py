import numpy as np
import pytest
from scipy.special import gammaln

from depmix import Dataset, FAMILIES, ModelSpec, generate_example
from depmix.basis import fit_basis
from depmix.draws import Draw
from depmix.errors import DegenerateDataError, NumericError, SpecError
from depmix.models import (
    conditional_loglik,
    default_prior,
    empirical_kernel_prior,
    empirical_lddp_prior,
    joint_dp_prior,
    lsbp_prior,
    noninformative_lddp_prior,
    nw_empirical_prior,
    partition_log_prior,
)


def norm_logpdf(y, m, s2):
    return -0.5 * np.log(2 * np.pi * s2) - (y - m) ** 2 / (2 * s2)


# ---------------------------------------------------------------- specs

@pytest.mark.parametrize("family", FAMILIES)
def test_spec_roundtrip(family):
    X = np.random.default_rng(1).uniform(-2, 2, (60, 2))
    spec = ModelSpec(family).resolve(X)
    assert ModelSpec.from_dict(spec.to_dict()) == spec
    bare = ModelSpec(family)
    assert ModelSpec.from_dict(bare.to_dict()) == bare


def test_spec_defaults():
    spec = ModelSpec("lddp-bs")
    assert spec.truncation == 20 and spec.alpha == 1.0 and spec.prior == "empirical"
    assert ModelSpec("lsbp").prior == "P1"


def test_spec_rejects_bad_values():
    with pytest.raises(SpecError):
        ModelSpec("edp")
    with pytest.raises(SpecError):
        ModelSpec("lsbp", prior="noninformative")
    with pytest.raises(SpecError):
        ModelSpec("lddp", alpha=0.0)
    with pytest.raises(SpecError):
        ModelSpec.from_dict({"family": "nw", "bogus": 1})


def test_spec_labels():
    assert ModelSpec("lsbp-ns", prior="P2").label == "LSBP-NS (P2)"
    assert ModelSpec("lddp-bs", prior="noninformative").label == "LDDP-BS (non-informative)"


# ---------------------------------------------------------------- LDDP priors

def test_example1_empirical_prior_dimensions():
    ds = generate_example(1, seed=0)
    spec = ModelSpec("lddp-bs").resolve(ds.X)
    prior = empirical_lddp_prior(ds, spec.atom_basis)
    assert prior.dim == 7 and prior.nu == 9 and prior.a == 2


def test_empirical_prior_formulas(linear_data):
    basis = fit_basis("linear", linear_data.X)
    prior = empirical_lddp_prior(linear_data, basis)
    D = basis.evaluate(linear_data.X)
    beta, *_ = np.linalg.lstsq(D, linear_data.y, rcond=None)
    r = linear_data.y - D @ beta
    s2 = r @ r / (D.shape[0] - D.shape[1])
    Sigma = s2 * np.linalg.inv(D.T @ D)
    assert np.allclose(prior.m0, beta)
    assert np.allclose(prior.S0, Sigma)
    assert np.allclose(prior.Psi, 30 * Sigma)
    assert prior.nu == D.shape[1] + 2
    assert np.isclose(prior.b, np.sqrt(s2) / 2)


def test_empirical_prior_noiseless():
    x = np.linspace(0, 1, 20)
    prior = empirical_lddp_prior(Dataset(1 + 3 * x, x[:, None]), fit_basis("linear", x[:, None]))
    assert prior.b < 1e-8


def test_empirical_prior_scale_equivariance(linear_data):
    basis = fit_basis("linear", linear_data.X)
    c = 3.7
    p1 = empirical_lddp_prior(linear_data, basis)
    p2 = empirical_lddp_prior(Dataset(c * linear_data.y, linear_data.X), basis)
    assert np.allclose(p2.m0, c * p1.m0, atol=1e-8)
    assert np.allclose(p2.S0, c**2 * p1.S0, atol=1e-8)
    assert np.allclose(p2.Psi, c**2 * p1.Psi, atol=1e-8)
    assert abs(p2.b - c * p1.b) < 1e-8


def test_rank_deficient_design():
    X = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(DegenerateDataError):
        empirical_lddp_prior(Dataset(np.arange(10.0), X), fit_basis("linear", X))


def test_noninformative_prior():
    prior = noninformative_lddp_prior(7)
    assert np.array_equal(prior.S0, 10 * np.eye(7))
    assert np.array_equal(prior.m0, np.zeros(7)) and np.array_equal(prior.Psi, np.eye(7))
    assert prior.nu == 9 and prior.a == 2 and prior.b == 0.5


# ---------------------------------------------------------------- other priors

def test_lsbp_prior_variants():
    assert np.array_equal(lsbp_prior("P1", 3).coef_cov, np.diag([100.0, 10.0, 10.0]))
    assert np.array_equal(lsbp_prior("P2", 3).coef_cov, np.diag([1e4, 1e4, 1e4]))
    assert np.array_equal(lsbp_prior("P3", 4).coef_cov, np.eye(4))
    assert np.array_equal(lsbp_prior("P1", 3).coef_mean, np.zeros(3))


def test_kernel_prior_is_empirical(linear_data):
    basis = fit_basis("linear", linear_data.X)
    k = empirical_kernel_prior(linear_data, basis)
    p = empirical_lddp_prior(linear_data, basis)
    assert np.allclose(k.mean, p.m0) and np.allclose(k.cov, p.Psi) and k.a == 2 and k.b == p.b


def test_nw_prior_standardized():
    g = np.random.default_rng(3)
    X = g.normal(size=(200, 2))
    X = (X - X.mean(0)) / X.std(0, ddof=1)
    prior = nw_empirical_prior(Dataset(np.zeros(200), X))
    assert np.allclose(prior.loc_mean, 0, atol=1e-12) and np.allclose(prior.loc_var, 1)
    # IG(2, s) has mean s / (2 - 1) = s
    assert np.allclose(prior.scale_rate / (prior.scale_shape - 1), prior.loc_var)
    assert prior.concentration == 1.0 / 20


def test_nw_prior_example3_scale():
    ds = generate_example(3, seed=0)
    prior = nw_empirical_prior(ds)
    mean_scale = prior.scale_rate / (prior.scale_shape - 1)
    # sd of a sample variance of Unif(-2, 2) at n = 600: sqrt((mu4 - sigma^4) / n)
    se = np.sqrt((16 / 5 - 16 / 9) / 600)
    assert np.all(np.abs(mean_scale - 4 / 3) < 4 * se)


def test_nw_prior_constant_column():
    with pytest.raises(DegenerateDataError):
        nw_empirical_prior(Dataset(np.zeros(5), np.ones((5, 1))))


def test_joint_prior_constants(linear_data):
    prior = joint_dp_prior(linear_data)
    assert prior.covariates.kappa == 0.01 and prior.covariates.df == 3.0
    assert np.allclose(prior.covariates.mean, linear_data.X.mean(0))
    assert np.allclose(prior.covariates.scale, np.var(linear_data.X, ddof=1))
    assert prior.alpha == 1.0 and prior.regression.a == 2


@pytest.mark.parametrize("family", FAMILIES)
def test_default_prior_for_each_family(family, linear_data):
    spec = ModelSpec(family).resolve(linear_data.X)
    assert default_prior(spec, linear_data) is not None
    with pytest.raises(SpecError):
        default_prior(ModelSpec(family), linear_data)


# ---------------------------------------------------------------- partition prior

def test_partition_prior_two_points():
    together = np.exp(partition_log_prior([2], 1.0))
    apart = np.exp(partition_log_prior([1, 1], 1.0))
    assert abs(together - 0.5) < 1e-14 and abs(together + apart - 1) < 1e-14


def test_partition_prior_sums_to_one_n4():
    # set partitions of 4 points grouped by block sizes, with multiplicities
    shapes = {(4,): 1, (3, 1): 4, (2, 2): 3, (2, 1, 1): 6, (1, 1, 1, 1): 1}
    alpha = 0.7
    total = sum(m * np.exp(partition_log_prior(s, alpha)) for s, m in shapes.items())
    assert abs(total - 1) < 1e-12
    direct = 2 * np.log(alpha) + gammaln(alpha) - gammaln(alpha + 4) + gammaln(3)
    assert abs(partition_log_prior([3, 1], alpha) - direct) < 1e-14


# ---------------------------------------------------------------- likelihood

def lddp_spec(X):
    return ModelSpec("lddp", truncation=2).resolve(X)


def test_loglik_single_component(linear_data):
    spec = ModelSpec("lddp", truncation=1).resolve(linear_data.X)
    beta, s2 = np.array([[1.0, 2.0]]), np.array([0.09])
    draw = Draw(np.zeros(linear_data.n, int), beta, s2, {"omega": np.array([1.0])})
    ref = norm_logpdf(linear_data.y, 1 + 2 * linear_data.X[:, 0], 0.09).sum()
    assert abs(conditional_loglik(spec, draw, linear_data) - ref) < 1e-9


def test_loglik_two_component_hand_case():
    ds = Dataset(np.array([0.5, -1.0, 2.2]), np.array([[0.1], [0.4], [-0.3]]))
    spec = lddp_spec(ds.X)
    beta = np.array([[0.2, 1.0], [-0.5, 2.0]])
    s2 = np.array([0.5, 1.5])
    w = np.array([0.3, 0.7])
    draw = Draw(np.zeros(3, int), beta, s2, {"omega": w})
    ref = 0.0
    for y, x in zip(ds.y, ds.X[:, 0]):
        terms = [np.log(w[j]) + norm_logpdf(y, beta[j, 0] + beta[j, 1] * x, s2[j]) for j in range(2)]
        ref += max(terms) + np.log(sum(np.exp(t - max(terms)) for t in terms))
    assert abs(conditional_loglik(spec, draw, ds) - ref) < 1e-12


def test_loglik_invariances(linear_data):
    spec2 = lddp_spec(linear_data.X)
    spec3 = ModelSpec("lddp", truncation=3).resolve(linear_data.X)
    beta = np.array([[1.0, 2.0], [0.0, -1.0]])
    s2 = np.array([0.1, 2.0])
    base = Draw(np.zeros(linear_data.n, int), beta, s2, {"omega": np.array([0.4, 0.6])})
    swapped = Draw(base.allocations, beta[::-1], s2[::-1], {"omega": np.array([0.6, 0.4])})
    split = Draw(base.allocations, beta[[0, 0, 1]], s2[[0, 0, 1]], {"omega": np.array([0.2, 0.2, 0.6])})
    v = conditional_loglik(spec2, base, linear_data)
    assert abs(conditional_loglik(spec2, swapped, linear_data) - v) < 1e-9
    assert abs(conditional_loglik(spec3, split, linear_data) - v) < 1e-9


def test_loglik_rejects_nonfinite(linear_data):
    spec = lddp_spec(linear_data.X)
    draw = Draw(np.zeros(linear_data.n, int), np.array([[np.nan, 0.0], [0.0, 0.0]]), np.ones(2),
                {"omega": np.array([0.5, 0.5])})
    with pytest.raises(NumericError):
        conditional_loglik(spec, draw, linear_data)


def test_loglik_depweight_families(linear_data):
    """LSBP with zero coefficients and NW with shared kernels equal the constant-weight value."""
    beta = np.array([[1.0, 2.0], [0.0, -1.0]])
    s2 = np.array([0.1, 2.0])
    s = np.zeros(linear_data.n, int)
    lddp = conditional_loglik(lddp_spec(linear_data.X), Draw(s, beta, s2, {"omega": np.array([0.5, 0.5])}), linear_data)
    lsbp_spec = ModelSpec("lsbp", truncation=2).resolve(linear_data.X)
    lsbp = conditional_loglik(lsbp_spec, Draw(s, beta, s2, {"coef": np.zeros((1, 2))}), linear_data)
    nw_spec = ModelSpec("nw", truncation=2).resolve(linear_data.X)
    nw = conditional_loglik(nw_spec, Draw(s, beta, s2, {"omega": np.array([0.5, 0.5]), "loc": np.zeros((2, 1)),
                                                        "scale": np.ones((2, 1))}), linear_data)
    assert abs(lsbp - lddp) < 1e-9 and abs(nw - lddp) < 1e-9
