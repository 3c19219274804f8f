"""The erasure mechanism for `HmmModel` in O(|X|^|K| * n * m^2).

Two recursions replace enumeration:

- `backward_gamma` computes gamma[i, u, s] = p(x_{K >= i} = u_{>= i} | s_i = s)
  once per (model, K).
- `HmmMaskingSession` keeps psi[u, s] = p(s_i = s | x_K = u, y_1..y_i) and
  advances it one output at a time. The belief update mixes both emission
  hypotheses with the mechanism's own release probabilities, so erased
  outputs stay informative.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from genomask.config import CLAMP_TOLERANCE, MAX_HMM_SENSITIVE, NORMALIZATION_TOLERANCE
from genomask.distributions import HmmModel
from genomask.enumeration import ERASED, assignments, encode, is_negligible, release_table
from genomask.errors import CapacityError, ImpossibleContextError, InputError, NumericalError
from genomask.mechanism import (
    ErasureKernel,
    MaskedSequence,
    MechanismTranscript,
    erasure_probability,
    mean_and_stderr,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GammaTable:
    """gamma[i, u, s] for every position i, sensitive assignment u and state s."""

    gamma: np.ndarray
    sensitive: tuple[int, ...]
    values: np.ndarray
    arities: tuple[int, ...]

    @property
    def last_sensitive(self) -> int:
        return max(self.sensitive, default=-1)

    def code_of(self, secret: Sequence[int]) -> int:
        return int(encode(np.asarray([secret], dtype=np.int64), range(len(secret)), self.arities)[0])


def _sensitive_likelihood(hmm: HmmModel, gamma_values: np.ndarray, sensitive: tuple[int, ...], i: int) -> np.ndarray:
    if i not in sensitive:
        return np.ones((gamma_values.shape[0], hmm.m))
    return hmm.emission[i, gamma_values[:, sensitive.index(i)], :]


def _check_sensitive(hmm: HmmModel, sensitive: Sequence[int], limit: int) -> tuple[int, ...]:
    sensitive = hmm.validate_sensitive(sensitive)
    if len(sensitive) > limit:
        raise CapacityError(f"{len(sensitive)} sensitive positions exceed the limit of {limit}")
    return sensitive


def backward_gamma(hmm: HmmModel, sensitive: Sequence[int], limit: int = MAX_HMM_SENSITIVE) -> GammaTable:
    sensitive = _check_sensitive(hmm, sensitive, limit)
    values = assignments(hmm.arities, sensitive)
    gamma = np.empty((hmm.n, values.shape[0], hmm.m))
    gamma[-1] = _sensitive_likelihood(hmm, values, sensitive, hmm.n - 1)
    for i in range(hmm.n - 2, -1, -1):
        gamma[i] = _sensitive_likelihood(hmm, values, sensitive, i) * (gamma[i + 1] @ hmm.transition.T)
    gamma.flags.writeable = False
    return GammaTable(gamma, sensitive, values, tuple(hmm.arities[k] for k in sensitive))


def transition_given_sensitive(
    hmm: HmmModel, gamma: GammaTable, i: int, u: int, strict: bool = True
) -> np.ndarray:
    """p(s_i | s_{i-1}, x_K = u) as an m x m kernel, for 1 <= i < n (0-based).

    With `strict`, a state s_{i-1} from which u cannot be reached raises;
    otherwise its row is left at zero.
    """
    if not 1 <= i < hmm.n:
        raise InputError(f"no transition into position {i + 1}")
    kernel = hmm.transition * gamma.gamma[i, u][None, :]
    norm = kernel.sum(axis=1, keepdims=True)
    if strict and np.any(norm == 0):
        raise ImpossibleContextError(f"assignment {gamma.values[u].tolist()} unreachable at position {i + 1}")
    return np.divide(kernel, norm, out=np.zeros_like(kernel), where=norm > 0)


@dataclass(frozen=True, eq=False)
class PsiState:
    beliefs: np.ndarray
    position: int
    reachable: np.ndarray


class HmmMaskingSession:
    """Streaming mechanism state: feed x_i, receive y_i.

    A session belongs to one sequence and one thread; the `GammaTable` may be
    shared across sessions.
    """

    def __init__(
        self,
        hmm: HmmModel,
        sensitive: Sequence[int],
        secret: Sequence[int] | None = None,
        gamma: GammaTable | None = None,
        shortcut: bool = True,
    ):
        self.hmm = hmm
        self.gamma = gamma if gamma is not None else backward_gamma(hmm, sensitive)
        self.sensitive = self.gamma.sensitive
        if tuple(sorted(set(sensitive))) != self.sensitive:
            raise InputError("gamma table was computed for different sensitive positions")
        self.shortcut = shortcut
        self.outputs: list[int] = []
        self._observed: int | None = None
        if secret is not None:
            if len(secret) != len(self.sensitive):
                raise InputError("one secret value is required per sensitive position")
            self._observed = self.gamma.code_of(secret)
        count = self.gamma.values.shape[0]
        self._psi = np.zeros((count, hmm.m))
        self._reachable = np.ones(count, dtype=bool)
        self._impossible = False
        self._context: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def position(self) -> int:
        return len(self.outputs)

    @property
    def impossible(self) -> bool:
        return self._impossible

    @property
    def state(self) -> PsiState:
        return PsiState(self._psi.copy(), self.position, self._reachable.copy())

    def copy(self) -> HmmMaskingSession:
        clone = HmmMaskingSession.__new__(HmmMaskingSession)
        clone.__dict__.update(self.__dict__)
        clone.outputs = list(self.outputs)
        clone._psi = self._psi.copy()
        clone._reachable = self._reachable.copy()
        return clone

    def _prior(self) -> np.ndarray:
        """p(s_i | x_K = u, y_1..y_{i-1}) for every u; unreachable rows are zero.

        Row u equals ``psi[u] @ transition_given_sensitive(hmm, gamma, i, u)``.
        The gamma factor is pulled out of the kernel so every u shares one
        m x m product instead of materializing a kernel per assignment.
        """
        i = self.position
        gamma_i = self.gamma.gamma[i]
        transition = self.hmm.transition
        if i == 0:
            prior = gamma_i / self.hmm.m
        elif self.shortcut and i > self.gamma.last_sensitive:
            prior = self._psi @ transition
        else:
            norm = gamma_i @ transition.T
            ratio = np.divide(self._psi, norm, out=np.zeros_like(self._psi), where=norm > 0)
            prior = gamma_i * (ratio @ transition)

        totals = prior.sum(axis=1)
        if i == 0:
            self._reachable = totals > 0
        elif np.any(np.abs(totals[self._reachable] - 1.0) > NORMALIZATION_TOLERANCE):
            raise NumericalError(f"state prior failed to normalize at position {i + 1}")
        prior[~self._reachable] = 0.0
        return np.divide(prior, totals[:, None], out=np.zeros_like(prior), where=self._reachable[:, None])

    def _current(self) -> tuple[np.ndarray, np.ndarray]:
        if self._context is None:
            if self.position >= self.hmm.n:
                raise InputError("session has already produced every output")
            count, size = self.gamma.values.shape[0], self.hmm.alphabet.size
            if self._impossible:
                prior = np.zeros((count, self.hmm.m))
                table = np.full((count, size), np.nan)
            else:
                prior = self._prior()
                i = self.position
                if i in self.sensitive:
                    table = np.zeros((count, size))
                    table[np.arange(count), self.gamma.values[:, self.sensitive.index(i)]] = 1.0
                else:
                    table = prior @ self.hmm.emission[i].T
                table[~self._reachable] = np.nan
            self._context = (prior, table)
        return self._context

    def predictive_table(self) -> np.ndarray:
        """p(x_i = v | x_K = u, y_1..y_{i-1}) as a (|X|^|K|, |X|) table; NaN rows are unreachable."""
        return self._current()[1].copy()

    def predictive_prob(self, secret: Sequence[int]) -> np.ndarray:
        row = self._current()[1][self.gamma.code_of(secret)]
        if np.isnan(row[0]):
            raise ImpossibleContextError(f"x_K = {tuple(secret)} is unreachable at position {self.position + 1}")
        return row.copy()

    def release_table(self) -> np.ndarray:
        """Release probability r[u, v] at the current position."""
        table = self._current()[1]
        if self.position in self.sensitive:
            return np.zeros_like(table)
        try:
            return release_table(table)
        except ImpossibleContextError:
            return np.zeros_like(table)

    def step(self, symbol: int, rng: np.random.Generator) -> tuple[int, float]:
        """Mask the true symbol at the current position; returns (output, release probability)."""
        if self._observed is None:
            raise InputError("session was created without the sensitive values")
        if not 0 <= symbol < self.hmm.alphabet.size:
            raise InputError(f"symbol {symbol} outside the alphabet")
        table = self._current()[1]
        release_prob = 1.0 - erasure_probability(
            table, symbol, self._observed, self.position in self.sensitive
        )
        outcome = symbol if rng.random() < release_prob else ERASED
        self.advance(outcome)
        return outcome, release_prob

    def advance(self, output: int) -> None:
        """Condition the beliefs on output `output` at the current position."""
        i = self.position
        prior, _ = self._current()
        if not self._impossible:
            if i in self.sensitive:
                if output != ERASED:
                    raise InputError(f"position {i + 1} is sensitive and can only be erased")
                posterior = prior
            else:
                release = self.release_table()
                emission = self.hmm.emission[i]
                if output == ERASED:
                    likelihood = (1.0 - release) @ emission
                else:
                    likelihood = release[:, output][:, None] * emission[output][None, :]
                posterior = prior * likelihood
            self._update(posterior, i, output)
        self.outputs.append(output)
        self._context = None

    def _update(self, posterior: np.ndarray, i: int, output: int) -> None:
        totals = posterior.sum(axis=1)
        if totals[self._reachable].max() <= CLAMP_TOLERANCE:
            logger.warning(
                "output %s at position %d has probability zero; erasing the rest of the sequence",
                "*" if output == ERASED else output,
                i + 1,
            )
            self._impossible = True
            return
        if np.any(self._reachable & (totals <= 0)):
            raise NumericalError(f"beliefs vanished for some sensitive assignments at position {i + 1}")
        self._psi = np.divide(
            posterior, totals[:, None], out=np.zeros_like(posterior), where=self._reachable[:, None]
        )


def mask_hmm(
    hmm: HmmModel,
    x: Sequence[int],
    sensitive: Sequence[int],
    rng: np.random.Generator,
    gamma: GammaTable | None = None,
    limit: int = MAX_HMM_SENSITIVE,
) -> tuple[MaskedSequence, MechanismTranscript]:
    x = hmm.validate(x)
    sensitive = _check_sensitive(hmm, sensitive, limit)
    if hmm.joint_prob(x) == 0:
        logger.warning("input sequence has probability zero under the model")
    session = HmmMaskingSession(hmm, sensitive, [int(x[k]) for k in sensitive], gamma)
    transcript = MechanismTranscript()
    for i in range(hmm.n):
        context = tuple(enumerate(session.outputs))
        outcome, release_prob = session.step(int(x[i]), rng)
        transcript.record(i, context, release_prob, outcome)
    return MaskedSequence(tuple(session.outputs)), transcript


def hmm_kernel(hmm: HmmModel, sensitive: Sequence[int]) -> ErasureKernel:
    """The exact channel w(y | x) induced by the session, branching over every output prefix."""
    support = hmm.enumerate_support(keep_zeros=True)
    gamma = backward_gamma(hmm, sensitive)
    codes = support.sensitive_codes(gamma.sensitive)
    columns: dict[tuple[int, ...], np.ndarray] = {}

    def visit(session: HmmMaskingSession, kernel: np.ndarray) -> None:
        i = session.position
        if i == hmm.n:
            columns[tuple(session.outputs)] = kernel
            return
        symbols = support.points[:, i]
        release = session.release_table()[codes, symbols]
        for output in (ERASED, *range(hmm.alphabet.size)):
            if output == ERASED:
                child = kernel * (1.0 - release)
            else:
                child = kernel * np.where(symbols == output, release, 0.0)
            if not is_negligible(child):
                branch = session.copy()
                branch.advance(output)
                visit(branch, child)

    visit(HmmMaskingSession(hmm, gamma.sensitive, gamma=gamma), np.ones(support.size))
    return ErasureKernel.from_columns(support, columns)


def hmm_rate_mc(
    hmm: HmmModel,
    sensitive: Sequence[int],
    runs: int,
    rng: np.random.Generator,
    progress: bool = False,
) -> tuple[float, float]:
    """Monte-Carlo rate with one gamma table shared by every run."""
    gamma = backward_gamma(hmm, sensitive)
    rates = np.empty(runs)
    for run in tqdm(range(runs), desc="masking", disable=not progress):
        x = hmm.sample(rng)
        y, _ = mask_hmm(hmm, x, gamma.sensitive, rng, gamma=gamma)
        rates[run] = 1.0 - y.erasures / hmm.n
    return mean_and_stderr(rates)
