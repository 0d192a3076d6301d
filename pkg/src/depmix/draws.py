"""One stored MCMC iteration and its JSON encoding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Draw:
    """Allocations plus whatever parameters the family carries.

    ``weights`` holds ``omega`` (single weights), ``coef`` (logit sticks) or
    ``omega``/``loc``/``scale`` (normalized kernels). ``clusters`` holds the
    sufficient statistics of a collapsed joint-model partition.
    """

    allocations: np.ndarray
    beta: np.ndarray | None = None
    sigma2: np.ndarray | None = None
    weights: dict[str, np.ndarray] = field(default_factory=dict)
    clusters: dict[str, np.ndarray] | None = None
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"allocations": self.allocations.astype(int).tolist()}
        if self.beta is not None:
            out["beta"] = self.beta.tolist()
            out["sigma2"] = self.sigma2.tolist()
        if self.weights:
            out["weights"] = {k: np.asarray(v).tolist() for k, v in self.weights.items()}
        if self.clusters is not None:
            out["clusters"] = {k: np.asarray(v).tolist() for k, v in self.clusters.items()}
        if self.extra:
            out["extra"] = {k: np.asarray(v).tolist() for k, v in self.extra.items()}
        return out

    @classmethod
    def from_json(cls, d: dict) -> "Draw":
        arr = lambda v: np.asarray(v, dtype=float)  # noqa: E731
        return cls(
            allocations=np.asarray(d["allocations"], dtype=int),
            beta=arr(d["beta"]) if "beta" in d else None,
            sigma2=arr(d["sigma2"]) if "sigma2" in d else None,
            weights={k: arr(v) for k, v in d.get("weights", {}).items()},
            clusters={k: arr(v) for k, v in d["clusters"].items()} if "clusters" in d else None,
            extra={k: arr(v) for k, v in d.get("extra", {}).items()},
        )

    def n_occupied(self) -> int:
        return int(np.unique(self.allocations).size)
