"""Posterior samplers and the ``fit`` entry point shared by the CLI and the study harness."""
from __future__ import annotations

import numpy as np

from ..dataset import Dataset
from ..errors import SpecError
from ..models import JointDPPrior, LDDPPrior, LSBPPrior, ModelSpec, NWPrior, default_prior
from ..stats import NIGParams, NIWParams
from .chain import Chain, McmcConfig, load_chain, run_chain, save_chain
from .joint_dp import JointDPSampler
from .lddp import LDDPSampler
from .lsbp import LSBPSampler
from .nw import NWSampler

__all__ = [
    "Chain",
    "McmcConfig",
    "fit",
    "fit_joint_dp",
    "fit_lddp",
    "fit_lsbp",
    "fit_nw",
    "joint_prior_from_dict",
    "joint_prior_to_dict",
    "load_chain",
    "run_chain",
    "save_chain",
]


def fit_joint_dp(dataset: Dataset, prior: JointDPPrior, cfg: McmcConfig, meta=None) -> Chain:
    return run_chain(JointDPSampler(dataset, prior), cfg, meta)


def fit_lddp(dataset: Dataset, spec: ModelSpec, prior: LDDPPrior, cfg: McmcConfig, meta=None) -> Chain:
    if spec.family not in ("lddp", "lddp-bs"):
        raise SpecError("fit_lddp needs an lddp or lddp-bs spec")
    return run_chain(LDDPSampler(dataset, spec, prior), cfg, meta)


def fit_lsbp(dataset: Dataset, spec: ModelSpec, prior: LSBPPrior, cfg: McmcConfig, meta=None) -> Chain:
    if spec.family not in ("lsbp", "lsbp-ns"):
        raise SpecError("fit_lsbp needs an lsbp or lsbp-ns spec")
    return run_chain(LSBPSampler(dataset, spec, prior), cfg, meta)


def fit_nw(dataset: Dataset, spec: ModelSpec, prior: NWPrior, cfg: McmcConfig, meta=None) -> Chain:
    if spec.family != "nw":
        raise SpecError("fit_nw needs an nw spec")
    return run_chain(NWSampler(dataset, spec, prior, cfg.proposal_scales), cfg, meta)


def joint_prior_to_dict(prior: JointDPPrior) -> dict:
    r, c = prior.regression.as_precision(), prior.covariates
    return {
        "alpha": float(prior.alpha),
        "regression": {"mean": r.mean.tolist(), "precision": r.matrix.tolist(), "a": float(r.a), "b": float(r.b)},
        "covariates": {"mean": c.mean.tolist(), "kappa": float(c.kappa), "df": float(c.df), "scale": c.scale.tolist()},
    }


def joint_prior_from_dict(d: dict) -> JointDPPrior:
    r, c = d["regression"], d["covariates"]
    return JointDPPrior(
        NIGParams(np.asarray(r["mean"]), np.asarray(r["precision"]), r["a"], r["b"], True),
        NIWParams(np.asarray(c["mean"]), c["kappa"], c["df"], np.asarray(c["scale"])),
        d["alpha"],
    )


def standardization(dataset: Dataset) -> dict:
    sd_x = dataset.X.std(axis=0, ddof=1)
    sd_y = dataset.y.std(ddof=1)
    if np.any(sd_x == 0) or sd_y == 0:
        raise SpecError("cannot standardize constant columns")
    return {
        "y_mean": float(dataset.y.mean()),
        "y_sd": float(sd_y),
        "x_mean": dataset.X.mean(axis=0).tolist(),
        "x_sd": sd_x.tolist(),
    }


def apply_transform(dataset: Dataset, tr: dict | None) -> Dataset:
    if not tr:
        return dataset
    X = (dataset.X - np.asarray(tr["x_mean"])) / np.asarray(tr["x_sd"])
    y = (dataset.y - tr["y_mean"]) / tr["y_sd"]
    return Dataset(y, X, dataset.columns)


def fit(dataset: Dataset, spec: ModelSpec, cfg: McmcConfig, prior=None) -> Chain:
    """Resolve bases on the training covariates, build the default prior and run the matching sampler.

    The chain metadata carries everything prediction needs: the resolved spec,
    an optional standardization and, for the joint model, its prior.
    """
    transform = standardization(dataset) if spec.standardize else None
    work = apply_transform(dataset, transform)
    spec = spec.resolve(work.X)
    if prior is None:
        prior = default_prior(spec, work)
    meta = {
        "spec": spec.to_dict(),
        "label": spec.label,
        "n": dataset.n,
        "p": dataset.p,
        "transform": transform,
        "train_y": {
            "min": float(dataset.y.min()),
            "max": float(dataset.y.max()),
            "sd": float(dataset.y.std(ddof=1)) if dataset.n > 1 else 0.0,
        },
    }
    if spec.family == "joint-dp":
        meta["joint_prior"] = joint_prior_to_dict(prior)
        return fit_joint_dp(work, prior, cfg, meta)
    if spec.family in ("lddp", "lddp-bs"):
        return fit_lddp(work, spec, prior, cfg, meta)
    if spec.family in ("lsbp", "lsbp-ns"):
        return fit_lsbp(work, spec, prior, cfg, meta)
    return fit_nw(work, spec, prior, cfg, meta)
