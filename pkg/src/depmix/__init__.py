"""Bayesian nonparametric density regression: six mixture families, a simulation harness and a CLI."""
from .dataset import Dataset, read_csv, write_csv
from .inference import McmcConfig, fit
from .models import FAMILIES, ModelSpec
from .predictive import predictive_summary
from .simstudy import evaluate_summary, generate_example, test_points

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "FAMILIES",
    "McmcConfig",
    "ModelSpec",
    "evaluate_summary",
    "fit",
    "generate_example",
    "predictive_summary",
    "read_csv",
    "test_points",
    "write_csv",
]
