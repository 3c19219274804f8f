"""Exact enumeration primitives shared by the models and the mechanism.

A `Support` lists every sequence x (one row per sequence) together with its
probability. All exact oracles work on weight vectors over that list:

- `conditional_table` turns weights into p(x_i | x_K = u, event) for every u.
- `release_table` applies the erasure rule: release x_i with probability
  min_u' p(x_i | u', event) / p(x_i | u, event).
- `output_factor` multiplies in the likelihood of one produced output symbol.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from genomask.config import CLAMP_TOLERANCE, CONSISTENCY_TOLERANCE
from genomask.errors import ImpossibleContextError, NumericalError

logger = logging.getLogger(__name__)

ERASED = -1


def encode(points: np.ndarray, positions: Sequence[int], arities: Sequence[int]) -> np.ndarray:
    """Row-major code of `points[:, positions]`, first position most significant."""
    codes = np.zeros(points.shape[0], dtype=np.int64)
    for position in positions:
        codes = codes * arities[position] + points[:, position]
    return codes


def assignments(arities: Sequence[int], positions: Sequence[int]) -> np.ndarray:
    """All joint values of `positions`, in `encode` order, shape (U, len(positions))."""
    ranges = [range(arities[p]) for p in positions]
    if not ranges:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product(*ranges)), dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Support:
    points: np.ndarray
    probs: np.ndarray
    arities: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.arities)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def sensitive_count(self, sensitive: Sequence[int]) -> int:
        return int(np.prod([self.arities[k] for k in sensitive], dtype=np.int64))

    def sensitive_codes(self, sensitive: Sequence[int]) -> np.ndarray:
        return encode(self.points, sensitive, self.arities)


def conditional_table(
    support: Support, weights: np.ndarray, position: int, sensitive: Sequence[int]
) -> np.ndarray:
    """p(x_position | x_K = u, event) where `weights` is p(x, event) per support row.

    Rows for assignments u with p(x_K = u, event) = 0 are NaN.
    """
    arity = support.arities[position]
    count = support.sensitive_count(sensitive)
    flat = support.sensitive_codes(sensitive) * arity + support.points[:, position]
    joint = np.bincount(flat, weights=weights, minlength=count * arity).reshape(count, arity)
    totals = joint.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        table = np.where(totals > 0, joint / totals, np.nan)
    return table


def release_table(conditionals: np.ndarray) -> np.ndarray:
    """Release probability r[u, v] of symbol v when the sensitive values are u.

    Unreachable rows (NaN) and zero denominators release with probability 0.
    Ratios within `CLAMP_TOLERANCE` of 1 or 0 are snapped, so an erasure whose
    probability vanishes for one u vanishes for all of them.
    """
    valid = ~np.isnan(conditionals[:, 0])
    if not valid.any():
        raise ImpossibleContextError("no sensitive assignment is consistent with the context")
    floor = conditionals[valid].min(axis=0)
    release = np.zeros_like(conditionals)
    reachable = conditionals[valid]
    with np.errstate(invalid="ignore", divide="ignore"):
        release[valid] = np.where(reachable > 0, floor / reachable, 0.0)

    low, high = release.min(), release.max()
    if low < -CONSISTENCY_TOLERANCE or high > 1 + CONSISTENCY_TOLERANCE:
        raise NumericalError(f"release probability out of range: [{low}, {high}]")
    if low < -CLAMP_TOLERANCE or high > 1 + CLAMP_TOLERANCE:
        logger.debug("clamping release probabilities in [%g, %g]", low, high)
    release = np.clip(release, 0.0, 1.0)
    release[release >= 1.0 - CLAMP_TOLERANCE] = 1.0
    release[release <= CLAMP_TOLERANCE] = 0.0
    return release


def point_release(
    support: Support, weights: np.ndarray, position: int, sensitive: Sequence[int]
) -> np.ndarray:
    """Release probability of every support row at `position` given `weights`."""
    if position in sensitive:
        return np.zeros(support.size)
    try:
        table = release_table(conditional_table(support, weights, position, sensitive))
    except ImpossibleContextError:
        return np.zeros(support.size)
    return table[support.sensitive_codes(sensitive), support.points[:, position]]


def output_factor(support: Support, release: np.ndarray, position: int, symbol: int) -> np.ndarray:
    """w(y_position = symbol | x, context) for every support row."""
    if symbol == ERASED:
        return 1.0 - release
    return np.where(support.points[:, position] == symbol, release, 0.0)


def is_negligible(kernel: np.ndarray) -> bool:
    """True when no support row produces the prefix with probability above round-off."""
    return not bool((kernel > CLAMP_TOLERANCE).any())
