"""Entropy, mutual information and KL divergence of discrete distributions, in bits."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import rel_entr
from scipy.stats import entropy as _entropy

from genomask.config import CONSISTENCY_TOLERANCE
from genomask.errors import InputError


def _distribution(values: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if np.any(arr < 0):
        raise InputError(f"{name} has negative entries")
    total = arr.sum()
    if abs(total - 1.0) > CONSISTENCY_TOLERANCE:
        raise InputError(f"{name} sums to {total}, not 1")
    return arr


def entropy(dist: np.ndarray) -> float:
    return float(_entropy(_distribution(dist, "distribution").reshape(-1), base=2))


def mutual_information(joint: np.ndarray) -> float:
    """I(A; B) for a joint table with A along rows and B along columns."""
    joint = _distribution(joint, "joint table")
    if joint.ndim != 2:
        raise InputError("mutual information needs a two-dimensional joint table")
    product = np.outer(joint.sum(axis=1), joint.sum(axis=0))
    value = rel_entr(joint, product).sum() / math.log(2)
    return max(0.0, float(value))


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """D(p || q); +inf when p puts mass where q has none."""
    p = _distribution(p, "p")
    q = _distribution(q, "q")
    if p.shape != q.shape:
        raise InputError(f"shape mismatch {p.shape} vs {q.shape}")
    if np.any((p > 0) & (q == 0)):
        return math.inf
    return max(0.0, float(rel_entr(p, q).sum() / math.log(2)))
