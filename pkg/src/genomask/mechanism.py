"""The sequential erasure mechanism for any `SequenceModel`.

Positions are processed in an `Ordering`. At each position the true symbol x_i
is released with probability

    min_u p(x_i | x_K = u, y_prefix) / p(x_i | x_K = u_obs, y_prefix)

and erased otherwise, where y_prefix are the outputs already produced. Erased
prefix entries are informative: they condition on the mechanism's own erasure
probability rather than on nothing. Positions in K are always erased.

Exact oracles enumerate the model's support and branch over output prefixes
(`walk_prefixes`), so they are limited to small n.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from tqdm import tqdm

from genomask import information
from genomask.config import CONSISTENCY_TOLERANCE, ENUMERATION_BUDGET
from genomask.distributions import HmmModel, SequenceModel, parse_symbol, symbol_char
from genomask.enumeration import (
    ERASED,
    Support,
    conditional_table,
    encode,
    is_negligible,
    output_factor,
    release_table,
)
from genomask.errors import CapacityError, ImpossibleContextError, InputError, NumericalError

logger = logging.getLogger(__name__)

Prefix = tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class MaskedSequence:
    """An output y; `ERASED` marks an erasure."""

    symbols: tuple[int, ...]

    @classmethod
    def from_array(cls, values: Sequence[int]) -> MaskedSequence:
        return cls(tuple(int(v) for v in values))

    @classmethod
    def from_text(cls, text: str) -> MaskedSequence:
        return cls(tuple(ERASED if c == "*" else parse_symbol(c) for c in text.strip()))

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def erasures(self) -> int:
        return sum(1 for s in self.symbols if s == ERASED)

    @property
    def erased_positions(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.symbols) if s == ERASED)

    def is_faithful_to(self, x: Sequence[int]) -> bool:
        if len(x) != len(self.symbols):
            return False
        return all(y == ERASED or y == int(v) for y, v in zip(self.symbols, x))

    def to_text(self) -> str:
        return "".join("*" if s == ERASED else symbol_char(s) for s in self.symbols)

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True)
class Ordering:
    """Processing order as a permutation of 0..n-1."""

    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise InputError(f"ordering {[p + 1 for p in perm]} is not a permutation of 1..{len(perm)}")
        object.__setattr__(self, "perm", perm)

    @classmethod
    def linear(cls, n: int) -> Ordering:
        return cls(tuple(range(n)))

    @classmethod
    def from_one_based(cls, values: Sequence[int]) -> Ordering:
        return cls(tuple(int(v) - 1 for v in values))

    @classmethod
    def parse(cls, text: str) -> Ordering:
        """Comma-separated 1-based positions, e.g. ``"3,1,2"``."""
        try:
            return cls.from_one_based([int(v) for v in text.split(",") if v.strip()])
        except ValueError as exc:
            raise InputError(f"malformed ordering {text!r}") from exc

    @property
    def n(self) -> int:
        return len(self.perm)

    @property
    def is_linear(self) -> bool:
        return self.perm == tuple(range(self.n))

    def one_based(self) -> tuple[int, ...]:
        return tuple(p + 1 for p in self.perm)

    def require_length(self, n: int) -> Ordering:
        if self.n != n:
            raise InputError(f"ordering covers {self.n} positions, sequence has {n}")
        return self


def _outcome_json(symbol: int) -> str | int:
    return "*" if symbol == ERASED else int(symbol)


@dataclass(frozen=True)
class TranscriptEntry:
    position: int
    context: Prefix
    release_prob: float
    outcome: int

    def to_dict(self) -> dict:
        return {
            "i": self.position + 1,
            "context": [[j + 1, _outcome_json(y)] for j, y in self.context],
            "release_prob": self.release_prob,
            "outcome": _outcome_json(self.outcome),
        }


@dataclass
class MechanismTranscript:
    """Per-position record of the decisions taken while masking one sequence."""

    entries: list[TranscriptEntry] = field(default_factory=list)

    def record(self, position: int, context: Prefix, release_prob: float, outcome: int) -> None:
        if not 0.0 <= release_prob <= 1.0:
            raise NumericalError(f"release probability {release_prob} at position {position + 1}")
        self.entries.append(TranscriptEntry(position, context, release_prob, outcome))

    def __iter__(self) -> Iterator[TranscriptEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def release_probabilities(self) -> np.ndarray:
        """Release probabilities indexed by position."""
        probs = np.zeros(len(self.entries))
        for entry in self.entries:
            probs[entry.position] = entry.release_prob
        return probs

    def to_jsonl(self) -> str:
        return "".join(json.dumps(entry.to_dict()) + "\n" for entry in self.entries)


def erasure_probability(
    conditionals: np.ndarray, symbol: int, observed: int, sensitive_position: bool = False
) -> float:
    """Probability of erasing `symbol` given the conditional table of the current context.

    `conditionals[u, v]` is p(x_i = v | x_K = u, y_prefix) with NaN rows for
    unreachable u; `observed` is the row code of the true x_K. Impossible
    contexts erase.
    """
    if sensitive_position or np.isnan(conditionals[observed, 0]):
        return 1.0
    try:
        release = release_table(conditionals)
    except ImpossibleContextError:
        return 1.0
    return float(1.0 - release[observed, symbol])


def _row_release(
    support: Support, conditionals: np.ndarray, position: int, sensitive: Sequence[int], codes: np.ndarray
) -> np.ndarray:
    if position in sensitive:
        return np.zeros(support.size)
    try:
        table = release_table(conditionals)
    except ImpossibleContextError:
        return np.zeros(support.size)
    return table[codes, support.points[:, position]]


def _resolve(model: SequenceModel, sensitive: Sequence[int], ordering: Ordering | None):
    sensitive = model.validate_sensitive(sensitive)
    ordering = Ordering.linear(model.n) if ordering is None else ordering.require_length(model.n)
    return sensitive, ordering


def mask_sequence(
    model: SequenceModel,
    x: Sequence[int],
    sensitive: Sequence[int],
    ordering: Ordering | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[MaskedSequence, MechanismTranscript]:
    """Run the mechanism on `x`, drawing one uniform per position from `rng`."""
    x = model.validate(x)
    sensitive, ordering = _resolve(model, sensitive, ordering)
    rng = rng if rng is not None else np.random.default_rng()
    if model.joint_prob(x) == 0:
        logger.warning("input sequence has probability zero under the model")

    support = model.support
    codes = support.sensitive_codes(sensitive)
    observed = int(encode(x[None, :], sensitive, model.arities)[0])
    kernel = np.ones(support.size)
    outputs = [ERASED] * model.n
    prefix: Prefix = ()
    transcript = MechanismTranscript()

    for position in ordering.perm:
        conditionals = conditional_table(support, support.probs * kernel, position, sensitive)
        release_prob = 1.0 - erasure_probability(
            conditionals, int(x[position]), observed, position in sensitive
        )
        outcome = int(x[position]) if rng.random() < release_prob else ERASED
        transcript.record(position, prefix, release_prob, outcome)

        rows = _row_release(support, conditionals, position, sensitive, codes)
        kernel = kernel * output_factor(support, rows, position, outcome)
        outputs[position] = outcome
        prefix = prefix + ((position, outcome),)

    return MaskedSequence(tuple(outputs)), transcript


@dataclass(frozen=True, eq=False)
class PrefixNode:
    """One reachable output prefix.

    `kernel[r]` is w(prefix | x = support.points[r]). Internal nodes also carry
    the next `position`, its conditional table and the per-row release
    probability used there.
    """

    prefix: Prefix
    kernel: np.ndarray
    position: int | None = None
    conditionals: np.ndarray | None = None
    release: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.position is None

    def output(self, n: int) -> tuple[int, ...]:
        y = [ERASED] * n
        for j, symbol in self.prefix:
            y[j] = symbol
        return tuple(y)


def walk_prefixes(support: Support, sensitive: Sequence[int], ordering: Ordering) -> Iterator[PrefixNode]:
    """Depth-first walk over every output prefix the mechanism can produce."""
    sensitive = tuple(sensitive)
    codes = support.sensitive_codes(sensitive)

    def visit(prefix: Prefix, kernel: np.ndarray) -> Iterator[PrefixNode]:
        if len(prefix) == ordering.n:
            yield PrefixNode(prefix, kernel)
            return
        position = ordering.perm[len(prefix)]
        conditionals = conditional_table(support, support.probs * kernel, position, sensitive)
        release = _row_release(support, conditionals, position, sensitive, codes)
        yield PrefixNode(prefix, kernel, position, conditionals, release)
        for symbol in (ERASED, *range(support.arities[position])):
            child = kernel * output_factor(support, release, position, symbol)
            if not is_negligible(child):
                yield from visit(prefix + ((position, symbol),), child)

    yield from visit((), np.ones(support.size))


@dataclass(frozen=True, eq=False)
class OutputDistribution:
    """Exact joint law p(x_K = u, y) with u along rows and outputs along columns."""

    joint: np.ndarray
    outputs: tuple[tuple[int, ...], ...]
    n: int

    @property
    def sensitive_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def output_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    @cached_property
    def erasure_profile(self) -> np.ndarray:
        """p(y_i = erased) per position."""
        erased = np.array(self.outputs, dtype=np.int64).reshape(-1, self.n) == ERASED
        return self.output_marginal @ erased

    @property
    def expected_erasures(self) -> float:
        return float(self.erasure_profile.sum())

    @property
    def rate(self) -> float:
        return 1.0 - self.expected_erasures / self.n

    def mutual_information(self) -> float:
        return information.mutual_information(self.joint / self.joint.sum())

    def max_deviation(self) -> float:
        """max over reachable u and all y of |p(y | x_K = u) - p(y)|."""
        p_u = self.sensitive_marginal
        reachable = p_u > 0
        given_u = self.joint[reachable] / p_u[reachable][:, None]
        return float(np.abs(given_u - self.output_marginal[None, :]).max())

    def total_variation(self, other: OutputDistribution) -> float:
        if self.joint.shape[0] != other.joint.shape[0]:
            raise InputError("distributions range over different sensitive alphabets")
        columns = {y: k for k, y in enumerate(self.outputs)}
        others = {y: k for k, y in enumerate(other.outputs)}
        total = 0.0
        for y in set(columns) | set(others):
            mine = self.joint[:, columns[y]] if y in columns else 0.0
            theirs = other.joint[:, others[y]] if y in others else 0.0
            total += float(np.abs(mine - theirs).sum())
        return 0.5 * total


@dataclass(frozen=True, eq=False)
class ErasureKernel:
    """A faithful channel w(y | x) over the rows of an enumerated support.

    `matrix[k, r]` is the probability of output `outputs[k]` given input
    `support.points[r]`; every column sums to 1.
    """

    support: Support
    outputs: tuple[tuple[int, ...], ...]
    matrix: np.ndarray

    def __post_init__(self):
        sums = self.matrix.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > 1e-8):
            raise NumericalError(f"kernel columns sum to [{sums.min()}, {sums.max()}], not 1")
        outs = np.array(self.outputs, dtype=np.int64).reshape(-1, self.support.n)
        points = self.support.points
        unfaithful = ((outs[:, None, :] != points[None, :, :]) & (outs[:, None, :] != ERASED)).any(axis=2)
        if np.any(unfaithful & (self.matrix > 0)):
            raise InputError("kernel substitutes symbols instead of erasing them")

    @classmethod
    def from_columns(cls, support: Support, columns: dict[tuple[int, ...], np.ndarray]) -> ErasureKernel:
        outputs = tuple(sorted(columns))
        matrix = np.stack([columns[y] for y in outputs]) if outputs else np.zeros((0, support.size))
        return cls(support, outputs, matrix)

    @classmethod
    def build(cls, support: Support, sensitive: Sequence[int], ordering: Ordering) -> ErasureKernel:
        """The sequential mechanism computed under the distribution `support.probs`."""
        columns = {
            node.output(support.n): node.kernel
            for node in walk_prefixes(support, sensitive, ordering.require_length(support.n))
            if node.is_leaf
        }
        return cls.from_columns(support, columns)

    @classmethod
    def deterministic(cls, support: Support, erase: np.ndarray) -> ErasureKernel:
        """Erase `erase[r, i]` (or a single mask shared by all rows) with probability 1."""
        erase = np.broadcast_to(np.asarray(erase, dtype=bool), support.points.shape)
        outputs = np.where(erase, ERASED, support.points)
        columns: dict[tuple[int, ...], np.ndarray] = {}
        for row, y in enumerate(map(tuple, outputs.tolist())):
            columns.setdefault(y, np.zeros(support.size))[row] = 1.0
        return cls.from_columns(support, columns)

    @classmethod
    def identity(cls, support: Support) -> ErasureKernel:
        """Release everything."""
        return cls.deterministic(support, np.zeros(support.n, dtype=bool))

    @classmethod
    def from_mask_table(cls, support: Support, table: np.ndarray) -> ErasureKernel:
        """`table[r, b]` is the probability of erasure mask b for row r; bit n-1-i of b erases position i."""
        n = support.n
        columns: dict[tuple[int, ...], np.ndarray] = {}
        for mask in range(1 << n):
            bits = np.array([(mask >> (n - 1 - i)) & 1 for i in range(n)], dtype=bool)
            outputs = np.where(bits, ERASED, support.points)
            for row in np.flatnonzero(table[:, mask] > 0):
                y = tuple(int(v) for v in outputs[row])
                columns.setdefault(y, np.zeros(support.size))[row] += table[row, mask]
        return cls.from_columns(support, columns)

    def joint(self, probs: np.ndarray, sensitive: Sequence[int]) -> OutputDistribution:
        """Compose with the input law `probs` (aligned with the support rows)."""
        probs = np.asarray(probs, dtype=float)
        if abs(probs.sum() - 1.0) > CONSISTENCY_TOLERANCE:
            raise InputError(f"input law puts mass {probs.sum()} on the kernel's support, not 1")
        codes = self.support.sensitive_codes(sensitive)
        selector = np.zeros((self.support.size, self.support.sensitive_count(sensitive)))
        selector[np.arange(self.support.size), codes] = probs
        return OutputDistribution((self.matrix @ selector).T, self.outputs, self.support.n)

    def compose(self, model: SequenceModel, sensitive: Sequence[int]) -> OutputDistribution:
        return self.joint(model.probabilities(self.support.points), sensitive)


def _check_budget(model: SequenceModel, budget: int) -> Support:
    support = model.enumerate_support(budget=budget) if budget != ENUMERATION_BUDGET else model.support
    pairs = support.size * (1 << model.n)
    if pairs > budget:
        raise CapacityError(f"{support.size} sequences x 2^{model.n} masks exceeds the budget of {budget}")
    return support


def exact_output_distribution(
    model: SequenceModel,
    sensitive: Sequence[int],
    ordering: Ordering | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> OutputDistribution:
    sensitive, ordering = _resolve(model, sensitive, ordering)
    support = _check_budget(model, budget)
    return ErasureKernel.build(support, sensitive, ordering).joint(support.probs, sensitive)


def achievable_rate_exact(
    model: SequenceModel,
    sensitive: Sequence[int],
    ordering: Ordering | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> float:
    return exact_output_distribution(model, sensitive, ordering, budget).rate


def achievability_terms(
    model: SequenceModel,
    sensitive: Sequence[int],
    ordering: Ordering | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> np.ndarray:
    """Per position i, E over output prefixes of sum_v min_u p(x_i = v | x_K = u, prefix).

    The mean of the returned vector is the achievable rate.
    """
    sensitive, ordering = _resolve(model, sensitive, ordering)
    support = _check_budget(model, budget)
    terms = np.zeros(model.n)
    for node in walk_prefixes(support, sensitive, ordering):
        if node.is_leaf or node.position in sensitive:
            continue
        mass = float((support.probs * node.kernel).sum())
        if mass <= 0:
            continue
        reachable = ~np.isnan(node.conditionals[:, 0])
        terms[node.position] += mass * node.conditionals[reachable].min(axis=0).sum()
    return terms


@dataclass(frozen=True)
class PrivacyReport:
    max_deviation: float
    mutual_information: float
    rate: float

    def holds(self, tolerance: float = 1e-10) -> bool:
        return self.max_deviation <= tolerance and self.mutual_information <= tolerance


def verify_privacy_exact(
    model: SequenceModel,
    sensitive: Sequence[int],
    ordering: Ordering | None = None,
    kernel: ErasureKernel | None = None,
) -> PrivacyReport:
    """Exact leakage of the mechanism (or of an explicit `kernel`) under `model`."""
    if kernel is None:
        distribution = exact_output_distribution(model, sensitive, ordering)
    else:
        distribution = kernel.compose(model, model.validate_sensitive(sensitive))
    return PrivacyReport(
        distribution.max_deviation(), distribution.mutual_information(), distribution.rate
    )


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size))


def achievable_rate_mc(
    model: SequenceModel,
    sensitive: Sequence[int],
    runs: int,
    rng: np.random.Generator,
    ordering: Ordering | None = None,
    progress: bool = False,
) -> tuple[float, float]:
    """Monte-Carlo estimate of the rate as (mean, standard error) over `runs` fresh samples.

    HMMs processed in linear order go through the forward–backward session,
    everything else through enumeration.
    """
    if runs < 1:
        raise InputError("runs must be at least 1")
    if isinstance(model, HmmModel) and (ordering is None or ordering.is_linear):
        from genomask.hmm import hmm_rate_mc

        return hmm_rate_mc(model, sensitive, runs, rng, progress=progress)

    rates = np.empty(runs)
    for run in tqdm(range(runs), desc="masking", disable=not progress):
        x = model.sample(rng)
        y, _ = mask_sequence(model, x, sensitive, ordering, rng)
        rates[run] = 1.0 - y.erasures / model.n
    return mean_and_stderr(rates)
