"""Model specifications, priors and the conditional likelihood for the six families."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln, logsumexp

from .basis import BasisSpec, fit_basis
from .dataset import Dataset
from .draws import Draw
from .errors import DegenerateDataError, NumericError, ParameterError, SpecError
from .stats import NIGParams, NIWParams, NormalGammaParams, normal_logpdf, safe_cholesky
from .weights import diag_gauss_logpdf, log_stick_break, logit_stick_log_weights, normalize_log_weights

FAMILIES = ("joint-dp", "lddp", "lddp-bs", "lsbp", "lsbp-ns", "nw")

DISPLAY_NAMES = {
    "joint-dp": "Joint DP",
    "lddp": "LDDP",
    "lddp-bs": "LDDP-BS",
    "lsbp": "LSBP",
    "lsbp-ns": "LSBP-NS",
    "nw": "NW",
}

_PRIOR_CHOICES = {
    "joint-dp": ("empirical",),
    "lddp": ("empirical", "noninformative"),
    "lddp-bs": ("empirical", "noninformative"),
    "lsbp": ("P1", "P2", "P3"),
    "lsbp-ns": ("P1", "P2", "P3"),
    "nw": ("empirical",),
}

LSBP_VARIANTS = ("P1", "P2", "P3")


@dataclass(frozen=True)
class ModelSpec:
    family: str
    truncation: int = 20
    alpha: float = 1.0
    prior: str = ""
    atom_knots: int = 0
    weight_knots: int = 4
    atom_basis: BasisSpec | None = None
    weight_basis: BasisSpec | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown model family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if not self.prior:
            object.__setattr__(self, "prior", _PRIOR_CHOICES[self.family][0])
        if self.prior not in _PRIOR_CHOICES[self.family]:
            raise SpecError(f"prior {self.prior!r} is not available for {self.family}")
        if int(self.truncation) != self.truncation or self.truncation < 1:
            raise SpecError("truncation must be a positive integer")
        if not self.alpha > 0:
            raise SpecError("concentration alpha must be positive")
        if self.atom_knots < 0 or self.weight_knots < 0:
            raise SpecError("knot counts must be non-negative")
        if self.family == "lsbp-ns" and self.weight_knots < 1:
            raise SpecError("natural splines need at least one interior knot")

    @property
    def atom_kind(self) -> str:
        return "cubic-bspline" if self.family == "lddp-bs" else "linear"

    @property
    def weight_kind(self) -> str | None:
        return {"lsbp": "linear", "lsbp-ns": "natural-cubic-spline"}.get(self.family)

    @property
    def standardize(self) -> bool:
        return self.prior == "noninformative"

    @property
    def label(self) -> str:
        name = DISPLAY_NAMES[self.family]
        if self.family in ("lsbp", "lsbp-ns") and self.prior != "P1":
            name += f" ({self.prior})"
        if self.prior == "noninformative":
            name += " (non-informative)"
        return name

    def resolve(self, X) -> "ModelSpec":
        """Fix knot locations from training covariates."""
        atom = fit_basis(self.atom_kind, X, self.atom_knots if self.family == "lddp-bs" else 0)
        weight = None
        if self.weight_kind is not None:
            k = self.weight_knots if self.weight_kind != "linear" else 0
            weight = fit_basis(self.weight_kind, X, k)
        return replace(self, atom_basis=atom, weight_basis=weight)

    def to_dict(self) -> dict:
        d = {
            "family": self.family,
            "truncation": int(self.truncation),
            "alpha": float(self.alpha),
            "prior": self.prior,
            "atom_knots": int(self.atom_knots),
            "weight_knots": int(self.weight_knots),
        }
        if self.atom_basis is not None:
            d["atom_basis"] = self.atom_basis.to_dict()
        if self.weight_basis is not None:
            d["weight_basis"] = self.weight_basis.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        known = {"family", "truncation", "alpha", "prior", "atom_knots", "weight_knots", "atom_basis", "weight_basis"}
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown model fields: {sorted(unknown)}")
        if "family" not in d:
            raise SpecError("model family is required")
        kw = {k: d[k] for k in known - {"atom_basis", "weight_basis"} if k in d}
        if "atom_basis" in d:
            kw["atom_basis"] = BasisSpec.from_dict(d["atom_basis"])
        if "weight_basis" in d:
            kw["weight_basis"] = BasisSpec.from_dict(d["weight_basis"])
        return cls(**kw)


# ---------------------------------------------------------------------------
# priors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LDDPPrior:
    """beta_j ~ N(m, S), 1/sigma_j^2 ~ Gamma(a, b), m ~ N(m0, S0), S^{-1} ~ Wishart(nu, (nu Psi)^{-1})."""

    m0: np.ndarray
    S0: np.ndarray
    nu: float
    Psi: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        Q = np.asarray(self.m0).size
        if not self.nu > Q - 1:
            raise ParameterError("nu must exceed Q - 1")
        if not (self.a > 0 and self.b > 0):
            raise ParameterError("a and b must be positive")
        safe_cholesky(self.Psi)
        safe_cholesky(self.S0)

    @property
    def dim(self) -> int:
        return np.asarray(self.m0).size


@dataclass(frozen=True)
class JointDPPrior:
    regression: NIGParams
    covariates: NIWParams
    alpha: float = 1.0


@dataclass(frozen=True)
class LSBPPrior:
    coef_mean: np.ndarray
    coef_var: np.ndarray  # diagonal of the covariance
    kernel: NormalGammaParams | NIGParams

    def __post_init__(self):
        if np.any(~(np.asarray(self.coef_var) > 0)):
            raise ParameterError("stick coefficient variances must be positive")

    @property
    def coef_cov(self) -> np.ndarray:
        return np.diag(self.coef_var)


@dataclass(frozen=True)
class NWPrior:
    loc_mean: np.ndarray
    loc_var: np.ndarray
    scale_shape: np.ndarray
    scale_rate: np.ndarray
    concentration: float  # per-component Dirichlet parameter
    kernel: NormalGammaParams | NIGParams | None = field(default=None)

    def __post_init__(self):
        for v in (self.loc_var, self.scale_shape, self.scale_rate):
            if np.any(~(np.asarray(v) > 0)):
                raise ParameterError("NW prior variances and inverse-gamma parameters must be positive")
        if not self.concentration > 0:
            raise ParameterError("Dirichlet concentration must be positive")


def _ols(design: np.ndarray, y: np.ndarray):
    n, Q = design.shape
    if n <= Q or np.linalg.matrix_rank(design) < Q:
        raise DegenerateDataError("least-squares design is rank deficient or has too few rows")
    XtX = design.T @ design
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ beta
    s2 = float(resid @ resid) / (n - Q)
    XtX_inv = np.linalg.inv(XtX)
    XtX_inv = 0.5 * (XtX_inv + XtX_inv.T)
    return beta, s2, XtX, XtX_inv


def empirical_lddp_prior(dataset: Dataset, atom_basis: BasisSpec) -> LDDPPrior:
    """Data-driven hyperparameters from least squares of y on lambda(x).

    m0 = beta_hat, S0 = Sigma_hat, nu = Q + 2, Psi = 30 Sigma_hat, a = 2, b = sigma_hat / 2.
    """
    design = atom_basis.evaluate(dataset.X)
    beta, s2, _, XtX_inv = _ols(design, dataset.y)
    Sigma = s2 * XtX_inv
    sigma = np.sqrt(s2)
    Q = design.shape[1]
    b = max(sigma / 2.0, 1e-12 * (1.0 + np.abs(dataset.y).max()))
    if s2 == 0:
        Sigma = Sigma + 1e-12 * np.eye(Q)
    return LDDPPrior(m0=beta, S0=Sigma, nu=Q + 2.0, Psi=30.0 * Sigma, a=2.0, b=b)


def noninformative_lddp_prior(Q: int) -> LDDPPrior:
    """Vague configuration intended for standardized data."""
    if Q < 1:
        raise ParameterError("Q must be positive")
    return LDDPPrior(m0=np.zeros(Q), S0=10.0 * np.eye(Q), nu=Q + 2.0, Psi=np.eye(Q), a=2.0, b=0.5)


def empirical_kernel_prior(dataset: Dataset, basis: BasisSpec) -> NormalGammaParams:
    """Regression-kernel prior from least squares, without a hyperprior layer.

    beta ~ N(beta_hat, 30 Sigma_hat) and 1/sigma^2 ~ Gamma(2, sigma_hat / 2),
    independent a priori.
    """
    design = basis.evaluate(dataset.X)
    beta, s2, _, XtX_inv = _ols(design, dataset.y)
    Sigma = 30.0 * s2 * XtX_inv
    if s2 == 0:
        Sigma = Sigma + 1e-12 * np.eye(design.shape[1])
    b = max(np.sqrt(s2) / 2.0, 1e-12 * (1.0 + np.abs(dataset.y).max()))
    return NormalGammaParams(beta, Sigma, 2.0, b)


def empirical_nig_prior(dataset: Dataset, basis: BasisSpec, kappa0: float = 0.01) -> NIGParams:
    """Conjugate regression prior centred at least squares.

    beta | sigma^2 ~ N(beta_hat, sigma^2 (kappa0 X'X / n)^{-1}), 1/sigma^2 ~ Gamma(2, sigma_hat / 2):
    the coefficient precision is kappa0 times the per-observation information,
    the same weak centring the covariate part uses for its location.
    """
    design = basis.evaluate(dataset.X)
    beta, s2, XtX, _ = _ols(design, dataset.y)
    n = design.shape[0]
    b = max(np.sqrt(s2) / 2.0, 1e-12 * (1.0 + np.abs(dataset.y).max()))
    return NIGParams(beta, kappa0 * XtX / n, 2.0, b, is_precision=True)


def lsbp_prior(variant: str, q_weight: int, kernel: NormalGammaParams | NIGParams | None = None) -> LSBPPrior:
    if variant not in LSBP_VARIANTS:
        raise ParameterError(f"unknown LSBP prior variant {variant!r}")
    if q_weight < 1:
        raise ParameterError("q_weight must be positive")
    if variant == "P1":
        var = np.full(q_weight, 10.0)
        var[0] = 100.0
    elif variant == "P2":
        var = np.full(q_weight, 1e4)
    else:
        var = np.ones(q_weight)
    return LSBPPrior(np.zeros(q_weight), var, kernel)


def nw_empirical_prior(dataset: Dataset, truncation: int = 20, alpha: float = 1.0,
                       kernel: NormalGammaParams | NIGParams | None = None) -> NWPrior:
    """Kernel locations ~ N(mean, var), kernel variances ~ IG(2, var) (prior mean var)."""
    X = dataset.X
    var = X.var(axis=0, ddof=1)
    if np.any(var == 0):
        raise DegenerateDataError("a covariate column is constant")
    return NWPrior(
        loc_mean=X.mean(axis=0),
        loc_var=var,
        scale_shape=np.full(X.shape[1], 2.0),
        scale_rate=var.copy(),
        concentration=alpha / truncation,
        kernel=kernel,
    )


def joint_dp_prior(dataset: Dataset, alpha: float = 1.0) -> JointDPPrior:
    """Conjugate base measure: empirical NIG for y|x, weak empirical NIW for x."""
    X = dataset.X
    p = X.shape[1]
    cov = np.atleast_2d(np.cov(X, rowvar=False))
    kappa0 = 0.01
    niw = NIWParams(X.mean(axis=0), kappa0, p + 2.0, cov)
    reg = empirical_nig_prior(dataset, fit_basis("linear", X), kappa0)
    return JointDPPrior(reg, niw, alpha)


def default_prior(spec: ModelSpec, dataset: Dataset):
    """The prior each family uses unless the caller supplies one (spec must be resolved)."""
    if spec.atom_basis is None:
        raise SpecError("resolve the spec on training data before building priors")
    f = spec.family
    if f in ("lddp", "lddp-bs"):
        if spec.prior == "noninformative":
            return noninformative_lddp_prior(spec.atom_basis.dim)
        return empirical_lddp_prior(dataset, spec.atom_basis)
    if f == "joint-dp":
        return joint_dp_prior(dataset, spec.alpha)
    kernel = empirical_kernel_prior(dataset, spec.atom_basis)
    if f in ("lsbp", "lsbp-ns"):
        return lsbp_prior(spec.prior, spec.weight_basis.dim, kernel)
    return nw_empirical_prior(dataset, spec.truncation, spec.alpha, kernel)


def partition_log_prior(counts, alpha: float) -> float:
    """log p(partition) under the DP: k log a + lgamma(a) - lgamma(a + n) + sum lgamma(n_j)."""
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    n = counts.sum()
    return float(counts.size * np.log(alpha) + gammaln(alpha) - gammaln(alpha + n) + gammaln(counts).sum())


# ---------------------------------------------------------------------------
# likelihood
# ---------------------------------------------------------------------------

def log_mixture_weights(spec: ModelSpec, draw: Draw, X: np.ndarray) -> np.ndarray:
    """(n, J) log weights at covariates X for one draw."""
    X = np.atleast_2d(X)
    n = X.shape[0]
    f = spec.family
    w = draw.weights
    if f in ("lddp", "lddp-bs"):
        with np.errstate(divide="ignore"):
            return np.broadcast_to(np.log(w["omega"]), (n, w["omega"].size))
    if f in ("lsbp", "lsbp-ns"):
        return logit_stick_log_weights(w["coef"], spec.weight_basis.evaluate(X))
    if f == "nw":
        with np.errstate(divide="ignore"):
            lw = np.log(w["omega"])
        return normalize_log_weights(lw, diag_gauss_logpdf(X, w["loc"], w["scale"]))
    if f == "joint-dp" and {"omega", "x_mean", "x_cov"} <= set(w):
        from scipy.stats import multivariate_normal

        lk = np.column_stack([
            multivariate_normal(w["x_mean"][j], w["x_cov"][j]).logpdf(X).reshape(n)
            for j in range(w["omega"].size)
        ])
        with np.errstate(divide="ignore"):
            return normalize_log_weights(np.log(w["omega"]), lk)
    raise SpecError(f"draw does not carry explicit weight parameters for {f}")


def conditional_loglik(spec: ModelSpec, draw: Draw, dataset: Dataset) -> float:
    """sum_i log sum_j omega_j(x_i) N(y_i; lambda(x_i)' beta_j, sigma_j^2)."""
    if draw.beta is None:
        raise SpecError("draw carries no component parameters")
    if not (np.all(np.isfinite(draw.beta)) and np.all(np.isfinite(draw.sigma2))):
        raise NumericError("non-finite component parameters")
    design = spec.atom_basis.evaluate(dataset.X)
    mu = design @ draw.beta.T
    lk = normal_logpdf(dataset.y[:, None], mu, draw.sigma2[None, :])
    lw = log_mixture_weights(spec, draw, dataset.X)
    return float(logsumexp(lw + lk, axis=1).sum())


def stick_weights_from_v(v: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.exp(log_stick_break(np.log(v), np.log1p(-v)))
