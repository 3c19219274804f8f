"""The window-erasure baseline and the model-mismatch robustness experiment."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import logsumexp

from genomask.config import CONSISTENCY_TOLERANCE, ENUMERATION_BUDGET
from genomask.distributions import HmmModel, SequenceModel
from genomask.enumeration import ERASED, assignments, encode
from genomask.errors import CapacityError, DegenerateSensitiveError, InputError, NumericalError
from genomask.information import entropy, kl_divergence
from genomask.mechanism import ErasureKernel, MaskedSequence, Ordering, mean_and_stderr

logger = logging.getLogger(__name__)

# H(X_K) below this is treated as zero.
ENTROPY_FLOOR = 1e-12


@dataclass(frozen=True)
class WindowPolicy:
    """Erase a fixed window: the first `omega` positions, or `omega` positions either side of each k in K."""

    mode: Literal["prefix", "radius"] = "prefix"
    omega: int = 0

    def __post_init__(self):
        if self.mode not in ("prefix", "radius"):
            raise InputError(f"unknown window mode {self.mode!r}")
        if self.omega < 0:
            raise InputError(f"window size must be non-negative, got {self.omega}")

    def erased(self, n: int, sensitive: Sequence[int] = (0,)) -> np.ndarray:
        """Boolean erase mask of length n."""
        if self.mode == "prefix" and self.omega > n:
            raise InputError(f"window {self.omega} is longer than the sequence ({n})")
        mask = np.zeros(n, dtype=bool)
        if self.mode == "prefix":
            mask[: self.omega] = True
        else:
            for k in sensitive:
                mask[max(0, k - self.omega) : k + self.omega + 1] = True
        return mask

    def erasure_rate(self, n: int, sensitive: Sequence[int] = (0,)) -> float:
        return float(self.erased(n, sensitive).mean())


@dataclass(frozen=True, eq=False)
class MismatchPair:
    """The true law `p_model` and the law `q_model` the mechanism is built from."""

    p_model: SequenceModel
    q_model: SequenceModel

    def __post_init__(self):
        if self.p_model.arities != self.q_model.arities:
            raise InputError("p and q must share length and alphabet")


def window_mask(x: Sequence[int], policy: WindowPolicy, sensitive: Sequence[int] = (0,)) -> MaskedSequence:
    x = np.asarray(x, dtype=np.int64)
    return MaskedSequence.from_array(np.where(policy.erased(x.size, sensitive), ERASED, x))


def _sensitive_entropy(p_u: np.ndarray) -> float:
    value = entropy(p_u)
    if value <= ENTROPY_FLOOR:
        raise DegenerateSensitiveError("the sensitive positions are deterministic under the model")
    return value


def window_leakage_exact(model: SequenceModel, sensitive: Sequence[int], policy: WindowPolicy) -> float:
    """I(X_K; X_released) / H(X_K) by enumeration."""
    sensitive = model.validate_sensitive(sensitive)
    support = model.support
    kernel = ErasureKernel.deterministic(support, policy.erased(model.n, sensitive))
    distribution = kernel.joint(support.probs, sensitive)
    return distribution.mutual_information() / _sensitive_entropy(distribution.sensitive_marginal)


def window_leakage_mc(
    hmm: HmmModel,
    sensitive: Sequence[int],
    policy: WindowPolicy,
    samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Normalized leakage estimate (H(X_K) - mean of -log2 p(x_K | x_released)) / H(X_K).

    Each posterior p(x_K | x_released) is exact, from HMM inference with the
    erased positions left unobserved.
    """
    sensitive = hmm.validate_sensitive(sensitive)
    if samples < 1:
        raise InputError("samples must be at least 1")
    values = assignments(hmm.arities, sensitive)
    evidence = np.full((values.shape[0], hmm.n), -1, dtype=np.int64)
    evidence[:, list(sensitive)] = values
    h_sensitive = _sensitive_entropy(np.exp(hmm.log_likelihoods(evidence)))

    x = hmm.sample_many(rng, samples)
    released = np.where(policy.erased(hmm.n, sensitive)[None, :], -1, x)
    scores = np.empty((samples, values.shape[0]))
    for u, assignment in enumerate(values):
        clamped = released.copy()
        clamped[:, list(sensitive)] = assignment
        conflict = np.any((released[:, list(sensitive)] >= 0) & (released[:, list(sensitive)] != assignment), axis=1)
        scores[:, u] = np.where(conflict, -np.inf, hmm.log_likelihoods(clamped))
    truth = encode(x, sensitive, hmm.arities)
    log_posterior = scores[np.arange(samples), truth] - logsumexp(scores, axis=1)
    surprisal = -log_posterior / math.log(2)
    mean, stderr = mean_and_stderr(surprisal)
    return (h_sensitive - mean) / h_sensitive, stderr / h_sensitive


@dataclass(frozen=True)
class RobustnessResult:
    """Leakage of a q-built mechanism under p, against the bound D(p || q), in bits.

    When the support is too large to enumerate, `leakage` and `q_self_leakage`
    are NaN and `kl_bound` is a Monte-Carlo estimate with standard error
    `kl_stderr`.
    """

    leakage: float
    kl_bound: float
    q_self_leakage: float
    kl_stderr: float = 0.0

    @property
    def exact(self) -> bool:
        return not math.isnan(self.leakage)

    @property
    def holds(self) -> bool:
        return not self.exact or self.leakage <= self.kl_bound + CONSISTENCY_TOLERANCE


def robustness_experiment(
    pair: MismatchPair,
    sensitive: Sequence[int],
    ordering: Ordering | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> RobustnessResult:
    """Build the mechanism from q, run it on data drawn from p, measure I_p(X_K; Y)."""
    q_model = pair.q_model
    sensitive = q_model.validate_sensitive(sensitive)
    ordering = Ordering.linear(q_model.n) if ordering is None else ordering.require_length(q_model.n)
    rows = math.prod(q_model.arities)
    if rows * (1 << q_model.n) > budget:
        raise CapacityError(f"{rows} sequences x 2^{q_model.n} masks exceeds the budget of {budget}")
    support = q_model.enumerate_support(keep_zeros=True, budget=budget)

    kernel = ErasureKernel.build(support, sensitive, ordering)
    p_probs = pair.p_model.probabilities(support.points)
    leakage = kernel.joint(p_probs, sensitive).mutual_information()
    q_self = kernel.joint(support.probs, sensitive).mutual_information()
    bound = kl_divergence(p_probs, support.probs)
    result = RobustnessResult(leakage, bound, q_self)
    if not result.holds:
        raise NumericalError(f"leakage {leakage} exceeds D(p || q) = {bound}")
    return result


def estimate_robustness(
    pair: MismatchPair,
    sensitive: Sequence[int],
    samples: int,
    rng: np.random.Generator,
    ordering: Ordering | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> RobustnessResult:
    """`robustness_experiment`, or only a sampled D(p || q) when q cannot be enumerated."""
    try:
        return robustness_experiment(pair, sensitive, ordering, budget)
    except CapacityError as exc:
        logger.info("%s; sampling D(p || q) from %d sequences instead", exc, samples)
    if samples < 1:
        raise InputError("samples must be at least 1")
    bound, stderr = kl_divergence_mc(pair.p_model, pair.q_model, samples, rng)
    return RobustnessResult(math.nan, bound, math.nan, kl_stderr=stderr)


def _log_probabilities(model: SequenceModel, points: np.ndarray) -> np.ndarray:
    if isinstance(model, HmmModel):
        return model.log_likelihoods(points)
    with np.errstate(divide="ignore"):
        return np.log(model.probabilities(points))


def kl_divergence_mc(
    p_model: SequenceModel, q_model: SequenceModel, samples: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte-Carlo D(p || q) in bits as the mean of log2 p(X)/q(X) over X ~ p."""
    if p_model.arities != q_model.arities:
        raise InputError("p and q must share length and alphabet")
    x = p_model.sample_many(rng, samples)
    log_ratio = _log_probabilities(p_model, x) - _log_probabilities(q_model, x)
    if np.any(np.isposinf(log_ratio)):
        return math.inf, 0.0
    return mean_and_stderr(log_ratio / math.log(2))
