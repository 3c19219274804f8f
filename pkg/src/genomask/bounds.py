"""Converse bound, the Markov tightness check, the LP optimum and information measures."""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from genomask.config import LP_VARIABLE_BUDGET
from genomask.distributions import SequenceModel, symbol_char
from genomask.enumeration import Support, encode
from genomask.errors import InputError
from genomask.information import entropy, kl_divergence, mutual_information
from genomask.mechanism import ErasureKernel, MaskedSequence, Ordering, walk_prefixes

__all__ = [
    "LpSolution",
    "bound_terms",
    "entropy",
    "kl_divergence",
    "lp_optimal_rate",
    "markov_sufficient_condition_check",
    "mutual_information",
    "upper_bound_rate",
]

logger = logging.getLogger(__name__)

# Two conditionals closer than this count as tied minimizers.
MINIMIZER_TOLERANCE = 1e-12


def bound_terms(model: SequenceModel, sensitive: Sequence[int]) -> np.ndarray:
    """sum_v min_u p(x_i = v | x_K = u) for every position (zero on K)."""
    sensitive = model.validate_sensitive(sensitive)
    terms = np.zeros(model.n)
    for i, table in enumerate(model.marginal_conditionals(sensitive)):
        if i in sensitive:
            continue
        reachable = ~np.isnan(table[:, 0])
        terms[i] = table[reachable].min(axis=0).sum()
    return terms


def upper_bound_rate(model: SequenceModel, sensitive: Sequence[int]) -> float:
    """No perfectly private faithful mechanism achieves a rate above this."""
    return float(bound_terms(model, sensitive).mean())


def markov_sufficient_condition_check(model: SequenceModel, sensitive: Sequence[int] = (0,)) -> bool:
    """Whether every minimizer u* of p(x_i | x_K = u) stays a minimizer after any reachable output prefix.

    When it holds, the mechanism meets `upper_bound_rate` with equality.
    """
    sensitive = model.validate_sensitive(sensitive)
    support = model.support
    marginals = model.marginal_conditionals(sensitive)
    for node in walk_prefixes(support, sensitive, Ordering.linear(model.n)):
        if node.is_leaf or node.position in sensitive:
            continue
        if (support.probs * node.kernel).sum() <= 0:
            continue
        base = marginals[node.position]
        reachable = ~np.isnan(node.conditionals[:, 0]) & ~np.isnan(base[:, 0])
        base, current = base[reachable], node.conditionals[reachable]
        minimizers = base <= base.min(axis=0) + MINIMIZER_TOLERANCE
        floor = current.min(axis=0)
        if np.any(minimizers & (current > floor + MINIMIZER_TOLERANCE)):
            logger.info("minimizer changes at position %d after prefix %s", node.position + 1, node.prefix)
            return False
    return True


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Optimal faithful perfectly private mechanism found by linear programming.

    `table[r, b]` is the probability of erasure mask b (bit n-1-i erases
    position i) for support row r.
    """

    optimal_rate: float
    status: str
    variable_count: int
    support: Support | None = None
    table: np.ndarray | None = None

    @property
    def kernel(self) -> ErasureKernel:
        if self.table is None or self.support is None:
            raise InputError(f"no mechanism available (status {self.status})")
        return ErasureKernel.from_mask_table(self.support, self.table)

    def to_json(self) -> str:
        triples = []
        if self.table is not None and self.support is not None:
            kernel = self.kernel
            for k, y in enumerate(kernel.outputs):
                for r in np.flatnonzero(kernel.matrix[k] > 1e-12):
                    x = "".join(symbol_char(int(v)) for v in self.support.points[r])
                    triples.append([x, MaskedSequence(y).to_text(), float(kernel.matrix[k, r])])
        return json.dumps(
            {
                "rate": self.optimal_rate,
                "status": self.status,
                "variables": self.variable_count,
                "mechanism": triples,
            }
        )


def _mask_bits(n: int) -> np.ndarray:
    masks = np.arange(1 << n)
    return ((masks[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1).astype(bool)


def _output_codes(support: Support, bits: np.ndarray) -> np.ndarray:
    """Code of y for every (row, mask) pair; erasure is encoded as the symbol `arity`."""
    erased_symbol = np.asarray(support.arities)[None, None, :]
    outputs = np.where(bits[None, :, :], erased_symbol, support.points[:, None, :])
    flat = outputs.reshape(-1, support.n)
    return encode(flat, range(support.n), [a + 1 for a in support.arities])


def lp_optimal_rate(
    model: SequenceModel, sensitive: Sequence[int], budget: int = LP_VARIABLE_BUDGET
) -> LpSolution:
    """Maximize the rate over every faithful mechanism with I(X_K; Y) = 0.

    Variables are w(mask | x) for x with p(x) > 0. Privacy is imposed as
    p(y | x_K = u_k) = p(y | x_K = u_{k+1}) for consecutive reachable u.
    """
    sensitive = model.validate_sensitive(sensitive)
    support = model.support
    n = model.n
    masks = 1 << n
    count = support.size * masks
    if count > budget:
        logger.info("LP needs %d variables, budget is %d", count, budget)
        return LpSolution(float("nan"), "capacity", count)

    bits = _mask_bits(n)
    kept = n - bits.sum(axis=1)
    cost = -(support.probs[:, None] * kept[None, :] / n).reshape(-1)

    codes = support.sensitive_codes(sensitive)
    p_u = np.bincount(codes, weights=support.probs, minlength=support.sensitive_count(sensitive))
    reachable = np.flatnonzero(p_u > 0)
    rank = np.full(p_u.size, -1)
    rank[reachable] = np.arange(reachable.size)
    pairs = reachable.size - 1

    rows, cols, vals = [], [], []
    if pairs > 0:
        _, y_index = np.unique(_output_codes(support, bits), return_inverse=True)
        variable = np.arange(count)
        row_of = np.repeat(np.arange(support.size), masks)
        u_rank = rank[codes][row_of]
        coefficient = support.probs[row_of] / p_u[codes][row_of]
        left = u_rank < pairs
        rows.append(y_index[left] * pairs + u_rank[left])
        cols.append(variable[left])
        vals.append(coefficient[left])
        right = u_rank > 0
        rows.append(y_index[right] * pairs + u_rank[right] - 1)
        cols.append(variable[right])
        vals.append(-coefficient[right])
        privacy_rows = (int(y_index.max()) + 1) * pairs
    else:
        privacy_rows = 0

    rows.append(privacy_rows + np.repeat(np.arange(support.size), masks))
    cols.append(np.arange(count))
    vals.append(np.ones(count))
    a_eq = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(privacy_rows + support.size, count),
    )
    b_eq = np.concatenate([np.zeros(privacy_rows), np.ones(support.size)])
    logger.info("solving LP with %d variables and %d equalities", count, a_eq.shape[0])

    result = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if result.status == 2:
        return LpSolution(float("nan"), "infeasible", count)
    if result.status != 0:
        logger.warning("LP solver stopped: %s", result.message)
        return LpSolution(float("nan"), "numerical", count)

    table = np.clip(result.x, 0.0, None).reshape(support.size, masks)
    table /= table.sum(axis=1, keepdims=True)
    rate = float((support.probs[:, None] * table * kept[None, :]).sum() / n)
    return LpSolution(rate, "optimal", count, support, table)
