"""Posterior co-clustering and a Binder-loss point estimate of the partition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class PartitionEstimate:
    labels: np.ndarray
    expected_loss: float
    draw_index: int
    method: str = "binder"


def _as_allocations(allocations) -> np.ndarray:
    S = np.asarray(allocations)
    if S.ndim == 1:
        S = S[None, :]
    if S.ndim != 2 or S.shape[0] < 1:
        raise ParameterError("need at least one draw of allocations")
    return S


def coclustering(labels) -> np.ndarray:
    labels = np.asarray(labels)
    return (labels[:, None] == labels[None, :]).astype(float)


def posterior_similarity(allocations) -> np.ndarray:
    """Fraction of draws in which each pair of observations shares a component."""
    S = _as_allocations(allocations)
    n = S.shape[1]
    P = np.zeros((n, n))
    for s in S:
        # one-hot products avoid an (n, n) boolean per draw when components are few
        _, inv = np.unique(s, return_inverse=True)
        Z = np.zeros((n, inv.max() + 1))
        Z[np.arange(n), inv] = 1.0
        P += Z @ Z.T
    return P / S.shape[0]


def binder_loss(labels, similarity) -> float:
    """sum_{i<l} |1(s_i = s_l) - P_il|."""
    A = coclustering(labels)
    iu = np.triu_indices(A.shape[0], k=1)
    return float(np.abs(A[iu] - np.asarray(similarity)[iu]).sum())


def canonical_labels(labels) -> np.ndarray:
    """Relabel to 0, 1, ... in order of first appearance."""
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    return np.argsort(np.argsort(first))[inv]


def binder_point_estimate(allocations, similarity=None) -> PartitionEstimate:
    """The sampled partition with the smallest expected Binder loss; ties go to the earliest draw."""
    S = _as_allocations(allocations)
    P = posterior_similarity(S) if similarity is None else np.asarray(similarity, dtype=float)
    losses = np.array([binder_loss(s, P) for s in S])
    best = int(np.argmin(losses))
    return PartitionEstimate(canonical_labels(S[best]), float(losses[best]), best)
