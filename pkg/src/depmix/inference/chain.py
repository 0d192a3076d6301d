"""Chain container, the generic run loop and JSON-lines persistence."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..draws import Draw
from ..errors import SpecError
from ..stats import RngStream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 10_000
    burn_in: int = 5_000
    thin: int = 5
    seed: int = 0
    stream: int = 0
    proposal_scales: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.iterations < 1:
            raise SpecError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise SpecError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise SpecError("thin must be >= 1")

    @property
    def n_stored(self) -> int:
        return len(range(self.burn_in + self.thin - 1, self.iterations, self.thin))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "McmcConfig":
        known = {"iterations", "burn_in", "thin", "seed", "stream", "proposal_scales"}
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown mcmc fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Chain:
    draws: list[Draw]
    meta: dict

    @property
    def complete(self) -> bool:
        return bool(self.meta.get("complete", False))

    def allocations(self) -> np.ndarray:
        return np.stack([d.allocations for d in self.draws])


def run_chain(sampler, cfg: McmcConfig, meta: dict | None = None) -> Chain:
    """Run ``sampler`` for ``cfg.iterations`` sweeps, keeping every ``thin``-th post-burn-in state.

    The sampler needs ``sweep(rng, adapt)`` and ``draw()``; ``end_burn_in()`` and
    ``diagnostics()`` are used when present. A KeyboardInterrupt returns the
    partial chain flagged incomplete.
    """
    rng = RngStream(cfg.seed, cfg.stream).generator()
    if hasattr(sampler, "initialize"):
        sampler.initialize(rng)
    draws: list[Draw] = []
    t0 = time.perf_counter()
    complete = True
    it = 0
    try:
        for it in range(cfg.iterations):
            if it == cfg.burn_in and hasattr(sampler, "end_burn_in"):
                sampler.end_burn_in()
            sampler.sweep(rng, adapt=it < cfg.burn_in)
            if it >= cfg.burn_in and (it - cfg.burn_in + 1) % cfg.thin == 0:
                draws.append(sampler.draw())
    except KeyboardInterrupt:
        complete = False
        log.warning("chain interrupted at iteration %d", it)
    out = dict(meta or {})
    out.update(
        mcmc=cfg.to_dict(),
        seed=cfg.seed,
        stream=cfg.stream,
        n_draws=len(draws),
        complete=complete,
        wall_time=time.perf_counter() - t0,
        diagnostics=sampler.diagnostics() if hasattr(sampler, "diagnostics") else {},
    )
    return Chain(draws, out)


# ---------------------------------------------------------------------------
# persistence: meta.json + chain.jsonl
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def chain_digest(draw_lines: list[str]) -> str:
    h = hashlib.sha256()
    for line in draw_lines:
        h.update(line.encode())
        h.update(b"\n")
    return h.hexdigest()


def save_chain(chain: Chain, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(d.to_json(), separators=(",", ":")) for d in chain.draws]
    meta = dict(chain.meta)
    meta["draws_sha256"] = chain_digest(lines)
    _atomic_write(out / "chain.jsonl", "\n".join(lines) + ("\n" if lines else ""))
    _atomic_write(out / "meta.json", json.dumps(meta, indent=2, sort_keys=True))
    return out


def load_chain(path) -> Chain:
    path = Path(path)
    meta = json.loads((path / "meta.json").read_text())
    draws = []
    with (path / "chain.jsonl").open() as fh:
        for line in fh:
            if line.strip():
                draws.append(Draw.from_json(json.loads(line)))
    return Chain(draws, meta)
