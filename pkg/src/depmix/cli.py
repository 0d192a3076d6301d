"""Command-line harness: generate, fit, predict, evaluate, replicate.

Exit codes: 0 success, 2 usage/configuration error, 3 numerical or runtime failure.
The default output directory comes from ``$DEPMIX_OUTPUT_DIR`` when ``--out`` is omitted.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, read_covariates, read_csv, write_csv
from .errors import DegenerateDataError, NumericError, ParameterError, SpecError
from .inference import McmcConfig, fit, load_chain, save_chain
from .models import FAMILIES, ModelSpec
from .partition import binder_point_estimate
from .predictive import PredictiveSummary, predictive_summary, y_grid
from .simstudy import DEFAULT_N, EXAMPLES, METRIC_KEYS, evaluate_summary, generate_example, test_points

log = logging.getLogger("depmix")

ENV_OUT = "DEPMIX_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

TABLE_COLUMNS = ("Model", "Regression Err", "Density Err", "Coverage", "CI length")
# the six families in benchmark-table row order
STUDY_MODELS = ("joint-dp", "nw", "lsbp", "lsbp-ns", "lddp-bs", "lddp")
SENSITIVITY = {
    1: ("lddp-bs:noninformative",),
    2: (),
    3: ("lsbp:P2", "lsbp:P3", "lsbp-ns:P2", "lsbp-ns:P3"),
}
EXCLUDED_NOTE = "Joint EDP is not implemented and is omitted from these tables."


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Schema for ``fit --config``: a model block and an mcmc block."""

    model: ModelSpec
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    data: str | None = None
    out: str | None = None
    test: dict | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise SpecError("config must be a JSON object")
        unknown = set(d) - {"model", "mcmc", "data", "out", "test"}
        if unknown:
            raise SpecError(f"unknown config fields: {sorted(unknown)}")
        if "model" not in d:
            raise SpecError("config needs a 'model' block")
        model = d["model"]
        if isinstance(model, str):
            model = {"family": model}
        test = d.get("test")
        if test is not None:
            if not isinstance(test, dict) or set(test) - {"example", "path"}:
                raise SpecError("test must be {'example': K} or {'path': PATH}")
        return cls(
            model=ModelSpec.from_dict(model),
            mcmc=McmcConfig.from_dict(d.get("mcmc", {})),
            data=d.get("data"),
            out=d.get("out"),
            test=test,
        )

    def to_dict(self) -> dict:
        d = {"model": self.model.to_dict(), "mcmc": self.mcmc.to_dict()}
        for k in ("data", "out", "test"):
            if getattr(self, k) is not None:
                d[k] = getattr(self, k)
        return d


def parse_cell(token: str) -> ModelSpec:
    """``family`` or ``family:prior`` (e.g. ``lsbp-ns:P2``)."""
    family, _, prior = token.strip().partition(":")
    return ModelSpec(family, prior=prior)


def cell_stream(example: int, key: str) -> int:
    """Stable per-cell RNG stream id."""
    return zlib.crc32(f"example{example}/{key}".encode())


def _out_dir(arg: str | None, *default_parts: str) -> Path:
    if arg:
        return Path(arg)
    env = os.environ.get(ENV_OUT)
    if not env:
        raise ConfigError(f"--out not given and ${ENV_OUT} is not set")
    return Path(env, *default_parts)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def _mcmc_overrides(args, base: McmcConfig) -> McmcConfig:
    d = base.to_dict()
    for k in ("iterations", "burn_in", "thin", "seed"):
        v = getattr(args, k, None)
        if v is not None:
            d[k] = v
    return McmcConfig.from_dict(d)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    data = generate_example(args.example, args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, data)
    _write_json(out.with_suffix(".json"), {"example": args.example, "n": data.n, "seed": args.seed})
    print(f"wrote {data.n} rows to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg_dict = {}
    if args.config:
        cfg_dict = json.loads(Path(args.config).read_text())
    if args.model:
        model = dict(cfg_dict.get("model", {})) if isinstance(cfg_dict.get("model"), dict) else {}
        model["family"] = args.model
        if args.prior:
            model["prior"] = args.prior
        cfg_dict["model"] = model
    if args.data:
        cfg_dict["data"] = args.data
    run = RunConfig.from_dict(cfg_dict)
    mcmc = _mcmc_overrides(args, run.mcmc)
    if not run.data:
        raise ConfigError("no dataset given (--data or config 'data')")
    data = read_csv(run.data)
    out = _out_dir(args.out or run.out, "fit", run.model.family)
    chain = fit(data, run.model, mcmc)
    chain.meta["data_path"] = str(run.data)
    save_chain(chain, out)
    warnings = chain.meta.get("diagnostics", {}).get("warnings") or []
    for w in warnings:
        log.warning("%s", w)
    print(f"{chain.meta['label']}: {len(chain.draws)} draws -> {out}")
    return EXIT_OK


def _parse_grid(spec: str, meta: dict) -> np.ndarray | None:
    if spec == "auto":
        return None
    try:
        lo, hi, n = spec.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError as exc:
        raise ConfigError(f"--ygrid must be 'auto' or 'lo:hi:n', got {spec!r}") from exc


def cmd_predict(args) -> int:
    chain_dir = Path(args.chain)
    if not (chain_dir / "meta.json").exists():
        raise ConfigError(f"{chain_dir} does not contain a chain")
    chain = load_chain(chain_dir)
    if not chain.complete:
        raise NumericError("chain is incomplete; refit before predicting")
    if args.example_test is not None:
        x_new = test_points(args.example_test)
    else:
        x_new = read_covariates(args.test)
    grid = _parse_grid(args.ygrid, chain.meta)
    summary = predictive_summary(chain, x_new, grid)
    out = _out_dir(args.out, "predict")
    summary.write(out)
    _write_json(out / "meta.json", {
        "chain": str(chain_dir),
        "label": chain.meta.get("label"),
        "example_test": args.example_test,
        "n_draws": len(chain.draws),
    })
    print(f"predictions for {x_new.shape[0]} points -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pred = Path(args.pred)
    summary = PredictiveSummary.read(pred)
    meta_path = pred / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    tagged = meta.get("example_test")
    if tagged is not None and tagged != args.example:
        raise ConfigError(f"predictions were made on example {tagged}'s test set, not example {args.example}")
    p = 1 if args.example == 2 else 2
    if summary.x.shape[1] != p:
        raise ConfigError(f"predictions have {summary.x.shape[1]} covariates; example {args.example} has {p}")
    metrics = evaluate_summary(args.example, summary)
    out = Path(args.out) if args.out else _out_dir(None, "metrics.json")
    _write_json(out, metrics)
    print(json.dumps(metrics))
    return EXIT_OK


def run_cell(example: int, token: str, data: Dataset, mcmc: McmcConfig, out: Path, save_chains: bool) -> dict:
    """Fit, predict and evaluate one (model, example) cell; files go under ``out``."""
    spec = parse_cell(token)
    cfg = McmcConfig.from_dict({**mcmc.to_dict(), "stream": cell_stream(example, token)})
    chain = fit(data, spec, cfg)
    x_test = test_points(example)
    summary = predictive_summary(chain, x_test)
    metrics = evaluate_summary(example, summary)
    summary.write(out)
    est = binder_point_estimate(chain.allocations())
    write_csv(out / "partition.csv", data, {"cluster": est.labels})
    _write_json(out / "metrics.json", metrics)
    _write_json(out / "run.json", {
        "label": spec.label,
        "model": chain.meta["spec"],
        "mcmc": cfg.to_dict(),
        "binder_loss": est.expected_loss,
        "n_clusters": int(est.labels.max() + 1),
        "diagnostics": chain.meta.get("diagnostics", {}),
    })
    if save_chains:
        save_chain(chain, out / "chain")
    return {"label": spec.label, **metrics}


def _cell_job(job):
    example, token, data, mcmc, out, save_chains = job
    try:
        return run_cell(example, token, data, mcmc, out, save_chains)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return {"label": parse_cell(token).label, "error": f"{type(exc).__name__}: {exc}"}


def format_table(rows: list[dict]) -> str:
    lines = [",".join(TABLE_COLUMNS)]
    for r in rows:
        if "error" in r:
            lines.append(f"{r['label']},error,error,error,error")
        else:
            lines.append(",".join([r["label"]] + [f"{r[k]:.4f}" for k in METRIC_KEYS]))
    return "\n".join(lines) + "\n"


def format_markdown(example: int, rows: list[dict]) -> str:
    head = "| " + " | ".join(TABLE_COLUMNS) + " |\n|" + "---|" * len(TABLE_COLUMNS) + "\n"
    body = ""
    for r in rows:
        vals = ["error"] * 4 if "error" in r else [f"{r[k]:.4f}" for k in METRIC_KEYS]
        body += "| " + " | ".join([r["label"], *vals]) + " |\n"
    return f"Example {example}\n\n{head}{body}\n{EXCLUDED_NOTE}\n"


def cmd_replicate(args) -> int:
    examples = list(EXAMPLES) if args.example == "all" else [int(args.example)]
    for e in examples:
        if e not in EXAMPLES:
            raise ConfigError(f"unknown example {e}")
    tokens = list(STUDY_MODELS) if args.models in ("all", None) else [t for t in args.models.split(",") if t]
    for t in tokens:
        parse_cell(t)  # validate before any compute
    out = _out_dir(args.out, "replicate")
    mcmc = _mcmc_overrides(args, McmcConfig())
    failed = False
    for e in examples:
        cells = tokens + (list(SENSITIVITY[e]) if args.sensitivity else [])
        edir = out / f"example{e}"
        data = generate_example(e, DEFAULT_N[e], mcmc.seed)
        edir.mkdir(parents=True, exist_ok=True)
        write_csv(edir / "data.csv", data)
        _write_json(edir / "data.json", {"example": e, "n": data.n, "seed": mcmc.seed})
        jobs = [(e, t, data, mcmc, edir / "cells" / t.replace(":", "-"), args.save_chains) for t in cells]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                rows = list(pool.map(_cell_job, jobs))
        else:
            rows = [_cell_job(j) for j in jobs]
        failed |= any("error" in r for r in rows)
        table = format_table(rows)
        (edir / "metrics.csv").write_text(table)
        (edir / "metrics.md").write_text(format_markdown(e, rows))
        _write_json(edir / "metrics.json", {"rows": rows, "note": EXCLUDED_NOTE})
        print(f"Example {e}\n{table}{EXCLUDED_NOTE}\n")
    return EXIT_RUNTIME if failed else EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _add_mcmc_flags(p):
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="depmix", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate one of the benchmark datasets")
    g.add_argument("--example", type=int, choices=EXAMPLES, required=True)
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="run MCMC for one model on a CSV dataset")
    f.add_argument("--model", choices=FAMILIES)
    f.add_argument("--prior", help="prior variant (e.g. P2, noninformative)")
    f.add_argument("--data")
    f.add_argument("--config")
    f.add_argument("--out")
    _add_mcmc_flags(f)
    f.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="posterior predictive summaries from a stored chain")
    p.add_argument("--chain", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--test")
    src.add_argument("--example-test", dest="example_test", type=int, choices=EXAMPLES)
    p.add_argument("--ygrid", default="auto")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", help="table metrics for predictions against an example's truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--example", type=int, choices=EXAMPLES, required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("replicate", help="generate, fit, predict and evaluate every (model, example) cell")
    r.add_argument("--example", default="all", choices=["1", "2", "3", "all"])
    r.add_argument("--models", default="all", help="comma-separated family[:prior] tokens or 'all'")
    r.add_argument("--sensitivity", action="store_true", help="add the prior-sensitivity rows")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--save-chains", dest="save_chains", action="store_true")
    r.add_argument("--out")
    _add_mcmc_flags(r)
    r.set_defaults(func=cmd_replicate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "seed", 0) is None and args.command == "replicate":
        args.seed = 0
    try:
        return args.func(args)
    except (ConfigError, SpecError, ParameterError, FileNotFoundError, IsADirectoryError,
            json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, DegenerateDataError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
