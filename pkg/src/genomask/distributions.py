"""Sequence models: an explicit joint table, a first-order Markov chain and the
Li–Stephens haplotype-copying HMM.

Every model exposes exact joint probabilities, sampling and, through its
enumerated `support`, exact conditional queries. The HMM additionally offers
forward–backward inference under partial evidence so that quantities needed at
n = 100 never require enumeration.
"""

from __future__ import annotations

import json
import logging
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from genomask.config import ENUMERATION_BUDGET
from genomask.enumeration import (
    Support,
    assignments,
    conditional_table,
    encode,
    output_factor,
    point_release,
)
from genomask.errors import CapacityError, ImpossibleContextError, InputError

logger = logging.getLogger(__name__)

SYMBOL_CHARS = "0123456789abcdefghijklmnopqrstuvwxyz"
# Sum-to-one tolerance for user-supplied tables.
STOCHASTIC_TOLERANCE = 1e-12
# Largest explicit joint table accepted.
MAX_EXPLICIT_TABLE = 1 << 20


def symbol_char(symbol: int) -> str:
    if not 0 <= symbol < len(SYMBOL_CHARS):
        raise InputError(f"symbol {symbol} has no single-character representation")
    return SYMBOL_CHARS[symbol]


def parse_symbol(char: str) -> int:
    index = SYMBOL_CHARS.find(char.lower())
    if index < 0:
        raise InputError(f"invalid symbol character {char!r}")
    return index


@dataclass(frozen=True)
class Alphabet:
    size: int = 2

    def __post_init__(self):
        if self.size < 2:
            raise InputError(f"alphabet size must be at least 2, got {self.size}")

    def __contains__(self, symbol: object) -> bool:
        return isinstance(symbol, (int, np.integer)) and 0 <= symbol < self.size


class SequenceModel(ABC):
    """A distribution p(x) over sequences with per-position finite alphabets."""

    @property
    @abstractmethod
    def arities(self) -> tuple[int, ...]:
        """Alphabet size at each position."""

    @property
    def n(self) -> int:
        return len(self.arities)

    @abstractmethod
    def joint_prob(self, x: Sequence[int]) -> float: ...

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> np.ndarray: ...

    def sample_many(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return np.stack([self.sample(rng) for _ in range(count)])

    def validate(self, x: Sequence[int]) -> np.ndarray:
        """Return `x` as an int array, raising InputError on length/alphabet mismatch."""
        arr = np.asarray(x, dtype=np.int64)
        if arr.shape != (self.n,):
            raise InputError(f"sequence has length {arr.size}, model expects {self.n}")
        if np.any(arr < 0) or np.any(arr >= np.asarray(self.arities)):
            raise InputError(f"sequence {arr.tolist()} has symbols outside the alphabet")
        return arr

    def validate_sensitive(self, sensitive: Sequence[int]) -> tuple[int, ...]:
        result = tuple(sorted({int(k) for k in sensitive}))
        if any(not 0 <= k < self.n for k in result):
            raise InputError(f"sensitive positions {list(sensitive)} outside 0..{self.n - 1}")
        return result

    def probabilities(self, points: np.ndarray) -> np.ndarray:
        """p(x) for each row of `points`."""
        return np.array([self.joint_prob(x) for x in points], dtype=float)

    def joint_table(self) -> np.ndarray:
        """p(x) for every x as an array of shape `arities`, first position most significant."""
        points = assignments(self.arities, range(self.n))
        probs = np.array([self.joint_prob(x) for x in points])
        return probs.reshape(self.arities)

    def enumerate_support(
        self, keep_zeros: bool = False, budget: int = ENUMERATION_BUDGET
    ) -> Support:
        size = int(np.prod(self.arities, dtype=np.int64))
        if size > budget:
            raise CapacityError(f"enumerating {size} sequences exceeds the budget of {budget}")
        points = assignments(self.arities, range(self.n))
        probs = self.joint_table().reshape(-1)
        if not keep_zeros:
            keep = probs > 0
            points, probs = points[keep], probs[keep]
        return Support(points, probs, self.arities)

    @cached_property
    def support(self) -> Support:
        return self.enumerate_support()

    def conditional_query(
        self,
        position: int,
        values: Sequence[int],
        sensitive: Sequence[int],
        prefix: Sequence[tuple[int, int]] = (),
    ) -> np.ndarray:
        """p(x_position | x_K = values, Y_j = y_j for (j, y_j) in `prefix`).

        `prefix` lists already-produced outputs in processing order; erased
        entries (`ERASED`) are weighted by the mechanism's own erasure
        probability, released ones condition X_j = y_j.
        """
        sensitive = tuple(sensitive)
        if len(values) != len(sensitive):
            raise InputError("one value is required per sensitive position")
        if position in {j for j, _ in prefix}:
            raise InputError(f"position {position} was already processed")
        support = self.support
        weights = support.probs.copy()
        for j, symbol in prefix:
            release = point_release(support, weights, j, sensitive)
            weights = weights * output_factor(support, release, j, symbol)
        table = conditional_table(support, weights, position, sensitive)
        code = int(encode(np.array([values]), range(len(values)), [self.arities[k] for k in sensitive])[0])
        row = table[code]
        if np.isnan(row[0]):
            raise ImpossibleContextError(
                f"p(x_K={tuple(values)}, prefix) = 0 at position {position}"
            )
        return row

    def marginal_conditionals(self, sensitive: Sequence[int]) -> list[np.ndarray]:
        """p(x_i | x_K = u) for every position i, as (|X|^|K|, |X_i|) tables."""
        support = self.support
        return [conditional_table(support, support.probs, i, sensitive) for i in range(self.n)]


@dataclass(frozen=True, eq=False)
class ExplicitJointModel(SequenceModel):
    """A joint table over alphabet^n, row-major with position 0 most significant."""

    n_positions: int
    alphabet: Alphabet
    probs: np.ndarray

    def __post_init__(self):
        size = self.alphabet.size**self.n_positions
        if size > MAX_EXPLICIT_TABLE:
            raise CapacityError(f"explicit table of {size} entries is too large")
        table = np.asarray(self.probs, dtype=float).reshape(-1)
        if table.size != size:
            raise InputError(f"expected {size} probabilities, got {table.size}")
        if np.any(table < 0):
            raise InputError("probabilities must be non-negative")
        if abs(table.sum() - 1.0) > STOCHASTIC_TOLERANCE:
            raise InputError(f"probabilities sum to {table.sum()}, not 1")
        table = table.reshape((self.alphabet.size,) * self.n_positions)
        table.flags.writeable = False
        object.__setattr__(self, "probs", table)

    @property
    def arities(self) -> tuple[int, ...]:
        return (self.alphabet.size,) * self.n_positions

    def joint_prob(self, x: Sequence[int]) -> float:
        return float(self.probs[tuple(self.validate(x))])

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_many(rng, 1)[0]

    def sample_many(self, rng: np.random.Generator, count: int) -> np.ndarray:
        flat = rng.choice(self.probs.size, size=count, p=self.probs.reshape(-1))
        return np.stack(np.unravel_index(flat, self.probs.shape), axis=1).astype(np.int64)

    def joint_table(self) -> np.ndarray:
        return np.array(self.probs)


@dataclass(frozen=True, eq=False)
class MarkovChainModel(SequenceModel):
    n_positions: int
    alphabet: Alphabet
    initial: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        size = self.alphabet.size
        initial = np.asarray(self.initial, dtype=float)
        transition = np.asarray(self.transition, dtype=float)
        if self.n_positions < 1:
            raise InputError("a Markov chain needs at least one position")
        if initial.shape != (size,) or transition.shape != (size, size):
            raise InputError(f"initial must have shape ({size},), transition ({size}, {size})")
        if np.any(initial < 0) or np.any(transition < 0):
            raise InputError("probabilities must be non-negative")
        if abs(initial.sum() - 1.0) > STOCHASTIC_TOLERANCE:
            raise InputError("initial distribution must sum to 1")
        if np.any(np.abs(transition.sum(axis=1) - 1.0) > STOCHASTIC_TOLERANCE):
            raise InputError("every transition row must sum to 1")
        initial.flags.writeable = False
        transition.flags.writeable = False
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transition", transition)

    @classmethod
    def sticky(cls, n: int, stay: float, alphabet: int = 2) -> MarkovChainModel:
        """Uniform start; keep the previous symbol with probability `stay`."""
        switch = (1.0 - stay) / (alphabet - 1)
        transition = np.full((alphabet, alphabet), switch)
        np.fill_diagonal(transition, stay)
        return cls(n, Alphabet(alphabet), np.full(alphabet, 1.0 / alphabet), transition)

    @property
    def arities(self) -> tuple[int, ...]:
        return (self.alphabet.size,) * self.n_positions

    def joint_prob(self, x: Sequence[int]) -> float:
        x = self.validate(x)
        prob = self.initial[x[0]]
        for prev, cur in zip(x[:-1], x[1:]):
            prob *= self.transition[prev, cur]
        return float(prob)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_many(rng, 1)[0]

    def sample_many(self, rng: np.random.Generator, count: int) -> np.ndarray:
        out = np.empty((count, self.n), dtype=np.int64)
        out[:, 0] = rng.choice(self.alphabet.size, size=count, p=self.initial)
        cumulative = np.cumsum(self.transition, axis=1)
        for i in range(1, self.n):
            draws = rng.random(count)
            rows = cumulative[out[:, i - 1]]
            out[:, i] = np.minimum((draws[:, None] >= rows).sum(axis=1), self.alphabet.size - 1)
        return out

    def joint_table(self) -> np.ndarray:
        table = np.array(self.initial)
        for _ in range(1, self.n):
            table = table[..., None] * self.transition
        return table


@dataclass(frozen=True, eq=False)
class HmmModel(SequenceModel):
    """Li–Stephens model: hidden reference index S_i, emissions copy the panel.

    S_1 is uniform over the m panel rows, S_i keeps S_{i-1} with probability
    1 - epsilon and otherwise jumps to one of the other m - 1 rows uniformly.
    X_i equals panel[S_i, i] except with probability theta, in which case it is
    one of the other |X| - 1 symbols uniformly.
    """

    panel: np.ndarray
    epsilon: float
    theta: float
    alphabet: Alphabet | None = None

    def __post_init__(self):
        panel = np.array(self.panel, dtype=np.int64)
        if panel.ndim != 2 or panel.size == 0:
            raise InputError("panel must be a non-empty m x n matrix")
        if not 0.0 <= self.epsilon <= 1.0 or not 0.0 <= self.theta <= 1.0:
            raise InputError("epsilon and theta must lie in [0, 1]")
        alphabet = self.alphabet or Alphabet(max(2, int(panel.max()) + 1))
        if panel.min() < 0 or panel.max() >= alphabet.size:
            raise InputError("panel entries fall outside the alphabet")
        panel.flags.writeable = False
        object.__setattr__(self, "panel", panel)
        object.__setattr__(self, "alphabet", alphabet)

    @property
    def m(self) -> int:
        return self.panel.shape[0]

    @property
    def arities(self) -> tuple[int, ...]:
        return (self.alphabet.size,) * self.panel.shape[1]

    @cached_property
    def transition(self) -> np.ndarray:
        """Dense m x m hidden-state kernel."""
        if self.m == 1:
            return np.ones((1, 1))
        kernel = np.full((self.m, self.m), self.epsilon / (self.m - 1))
        np.fill_diagonal(kernel, 1.0 - self.epsilon)
        return kernel

    @cached_property
    def emission(self) -> np.ndarray:
        """emission[i, v, s] = p(x_i = v | s_i = s)."""
        size = self.alphabet.size
        symbols = np.arange(size)[None, :, None]
        copied = self.panel.T[:, None, :] == symbols
        return np.where(copied, 1.0 - self.theta, self.theta / (size - 1))

    def truncated(self, n: int) -> HmmModel:
        """The same model restricted to the first `n` positions (epsilon, theta unchanged)."""
        if not 1 <= n <= self.n:
            raise InputError(f"cannot truncate length {self.n} to {n}")
        return HmmModel(self.panel[:, :n].copy(), self.epsilon, self.theta, self.alphabet)

    def propagate(self, alpha: np.ndarray) -> np.ndarray:
        """alpha @ transition, using the stay/switch structure of the kernel."""
        if self.m == 1:
            return alpha.copy()
        switch = self.epsilon / (self.m - 1)
        return alpha * (1.0 - self.epsilon - switch) + switch * alpha.sum(axis=-1, keepdims=True)

    def _evidence_likelihood(self, column: np.ndarray, i: int) -> np.ndarray:
        lik = np.ones((column.shape[0], self.m))
        observed = column >= 0
        lik[observed] = self.emission[i, column[observed], :]
        return lik

    def _forward(self, evidence: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Scaled forward pass; returns (normalized alphas (B,n,m), scales (B,n), log-likelihoods)."""
        count = evidence.shape[0]
        alphas = np.zeros((count, self.n, self.m))
        scales = np.zeros((count, self.n))
        alpha = np.full((count, self.m), 1.0 / self.m)
        for i in range(self.n):
            if i > 0:
                alpha = self.propagate(alpha)
            alpha = alpha * self._evidence_likelihood(evidence[:, i], i)
            scale = alpha.sum(axis=1)
            scales[:, i] = scale
            alpha = np.divide(alpha, scale[:, None], out=np.zeros_like(alpha), where=scale[:, None] > 0)
            alphas[:, i] = alpha
        with np.errstate(divide="ignore"):
            loglik = np.log(scales).sum(axis=1)
        return alphas, scales, loglik

    def log_likelihoods(self, evidence: np.ndarray) -> np.ndarray:
        """Natural-log probability of each evidence row (-1 marks an unobserved position)."""
        evidence = np.atleast_2d(np.asarray(evidence, dtype=np.int64))
        count = evidence.shape[0]
        loglik = np.zeros(count)
        alpha = np.full((count, self.m), 1.0 / self.m)
        for i in range(self.n):
            if i > 0:
                alpha = self.propagate(alpha)
            alpha = alpha * self._evidence_likelihood(evidence[:, i], i)
            scale = alpha.sum(axis=1)
            with np.errstate(divide="ignore"):
                loglik += np.log(scale)
            alpha = np.divide(alpha, scale[:, None], out=np.zeros_like(alpha), where=scale[:, None] > 0)
        return loglik

    def posteriors(self, evidence: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Forward–backward state posteriors p(s_i | evidence) with shape (B, n, m).

        Rows whose evidence has probability zero come back as NaN.
        """
        evidence = np.atleast_2d(np.asarray(evidence, dtype=np.int64))
        alphas, scales, loglik = self._forward(evidence)
        post = np.empty_like(alphas)
        beta = np.ones((evidence.shape[0], self.m))
        post[:, -1] = alphas[:, -1]
        for i in range(self.n - 2, -1, -1):
            nxt = scales[:, i + 1][:, None]
            beta = self.propagate(beta * self._evidence_likelihood(evidence[:, i + 1], i + 1))
            beta = np.divide(beta, nxt, out=np.zeros_like(beta), where=nxt > 0)
            weights = alphas[:, i] * beta
            total = weights.sum(axis=1, keepdims=True)
            post[:, i] = np.divide(weights, total, out=np.zeros_like(weights), where=total > 0)
        post[~np.isfinite(loglik)] = np.nan
        return loglik, post

    def joint_prob(self, x: Sequence[int]) -> float:
        return float(np.exp(self.log_likelihoods(self.validate(x))[0]))

    def probabilities(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.int64))
        chunks = np.array_split(points, max(1, len(points) // 4096))
        return np.exp(np.concatenate([self.log_likelihoods(chunk) for chunk in chunks]))

    def joint_table(self) -> np.ndarray:
        return self.probabilities(assignments(self.arities, range(self.n))).reshape(self.arities)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_many(rng, 1)[0]

    def sample_many(self, rng: np.random.Generator, count: int) -> np.ndarray:
        size = self.alphabet.size
        states = rng.integers(self.m, size=count)
        out = np.empty((count, self.n), dtype=np.int64)
        for i in range(self.n):
            if i > 0 and self.m > 1:
                jump = rng.random(count) < self.epsilon
                offsets = rng.integers(1, self.m, size=count)
                states = np.where(jump, (states + offsets) % self.m, states)
            symbols = self.panel[states, i]
            flip = rng.random(count) < self.theta
            offsets = rng.integers(1, size, size=count)
            out[:, i] = np.where(flip, (symbols + offsets) % size, symbols)
        return out

    def marginal_conditionals(self, sensitive: Sequence[int]) -> list[np.ndarray]:
        """p(x_i | x_K = u) for all i via one clamped forward–backward per u."""
        sensitive = tuple(sensitive)
        values = assignments(self.arities, sensitive)
        evidence = np.full((values.shape[0], self.n), -1, dtype=np.int64)
        if sensitive:
            evidence[:, list(sensitive)] = values
        loglik, post = self.posteriors(evidence)
        unreachable = ~np.isfinite(loglik)
        tables = []
        for i in range(self.n):
            if i in sensitive:
                table = np.zeros((values.shape[0], self.alphabet.size))
                table[np.arange(values.shape[0]), values[:, sensitive.index(i)]] = 1.0
            else:
                table = np.einsum("us,vs->uv", np.nan_to_num(post[:, i]), self.emission[i])
            table[unreachable] = np.nan
            tables.append(table)
        return tables


def generate_panel(m: int, n: int, alphabet: int, rng: np.random.Generator) -> np.ndarray:
    if m < 1 or n < 1:
        raise InputError("panel dimensions must be positive")
    return rng.integers(0, alphabet, size=(m, n), dtype=np.int64)


def write_panel(path: str | Path, panel: np.ndarray) -> None:
    lines = ["".join(symbol_char(int(v)) for v in row) for row in np.asarray(panel)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_panel(path: str | Path) -> np.ndarray:
    """One haplotype per line, one character per symbol, no separators."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read panel {path}: {exc}") from exc
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if not rows:
        raise InputError(f"panel {path} is empty")
    if len({len(row) for row in rows}) != 1:
        raise InputError(f"panel {path} has lines of different lengths")
    return np.array([[parse_symbol(c) for c in row] for row in rows], dtype=np.int64)


def model_from_dict(data: dict[str, Any], base_dir: Path | None = None) -> SequenceModel:
    """Build a model from its JSON description."""
    kind = data.get("type", "hmm" if "panel_path" in data else None)
    try:
        if kind == "hmm":
            panel_path = Path(data["panel_path"])
            if base_dir is not None and not panel_path.is_absolute():
                panel_path = base_dir / panel_path
            alphabet = Alphabet(int(data["alphabet"])) if "alphabet" in data else None
            return HmmModel(read_panel(panel_path), float(data["epsilon"]), float(data["theta"]), alphabet)
        if kind == "markov":
            return MarkovChainModel(
                int(data["n"]), Alphabet(int(data.get("alphabet", 2))), data["initial"], data["transition"]
            )
        if kind == "explicit":
            return ExplicitJointModel(int(data["n"]), Alphabet(int(data.get("alphabet", 2))), data["probs"])
    except KeyError as exc:
        raise InputError(f"model description is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed model description: {exc}") from exc
    raise InputError(f"unknown model type {kind!r}")


def load_model(path: str | Path) -> SequenceModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read model {path}: {exc}") from exc
    return model_from_dict(data, base_dir=path.parent)
