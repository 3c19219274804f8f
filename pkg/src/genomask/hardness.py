"""Hitting set as a mechanism ordering problem.

`build_parity_model` turns a hitting-set instance into a sequence model on
which the mechanism is deterministic: element i carries the bits of its edges
to the sets containing it, and each set j contributes one sensitive parity bit
over its edges. The fewest erasures achievable over all orderings equals the
size of a minimum hitting set.

Elements and sets are 1-based, as in instance files. Element e sits at
sequence position e - 1; set j's parity bit sits at position m + j - 1.
"""

from __future__ import annotations

import itertools
import json
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from genomask.config import MAX_HITTING_UNIVERSE, MAX_ORDERING_UNIVERSE, MAX_PARITY_EDGES
from genomask.distributions import SequenceModel
from genomask.enumeration import ERASED, Support, assignments
from genomask.errors import CapacityError, InputError
from genomask.mechanism import Ordering, walk_prefixes

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HittingSetInstance:
    m: int
    sets: tuple[frozenset[int], ...]

    def __post_init__(self):
        sets = tuple(frozenset(int(e) for e in s) for s in self.sets)
        object.__setattr__(self, "sets", sets)
        if self.m < 1 or not sets:
            raise InputError("an instance needs at least one element and one set")
        for j, s in enumerate(sets, start=1):
            if not s:
                raise InputError(f"set {j} is empty")
            if min(s) < 1 or max(s) > self.m:
                raise InputError(f"set {j} has elements outside 1..{self.m}")
        if frozenset().union(*sets) != frozenset(range(1, self.m + 1)):
            raise InputError("the sets do not cover the universe")

    @property
    def k(self) -> int:
        return len(self.sets)

    def incident(self, element: int) -> tuple[int, ...]:
        """Sets (1-based) containing `element`, ascending."""
        return tuple(j for j, s in enumerate(self.sets, start=1) if element in s)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """(element, set) pairs ordered by element, then set."""
        return tuple((e, j) for e in range(1, self.m + 1) for j in self.incident(e))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> HittingSetInstance:
        try:
            return cls(int(data["m"]), tuple(frozenset(s) for s in data["sets"]))
        except KeyError as exc:
            raise InputError(f"instance is missing field {exc}") from exc
        except TypeError as exc:
            raise InputError(f"malformed instance: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> HittingSetInstance:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read instance {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return {"m": self.m, "sets": [sorted(s) for s in self.sets]}


class ParityModel(SequenceModel):
    """Uniform edge bits; element positions hold their bits packed into one symbol."""

    def __init__(self, instance: HittingSetInstance):
        self.instance = instance

    @cached_property
    def arities(self) -> tuple[int, ...]:
        elements = tuple(1 << len(self.instance.incident(e)) for e in range(1, self.instance.m + 1))
        return elements + (2,) * self.instance.k

    @property
    def sensitive(self) -> tuple[int, ...]:
        return tuple(range(self.instance.m, self.instance.m + self.instance.k))

    def assemble(self, bits: np.ndarray) -> np.ndarray:
        """Sequences for rows of edge bits (columns ordered as `instance.edges`)."""
        bits = np.atleast_2d(bits).astype(np.int64)
        out = np.zeros((bits.shape[0], self.n), dtype=np.int64)
        index = {edge: col for col, edge in enumerate(self.instance.edges)}
        for e in range(1, self.instance.m + 1):
            for j in self.instance.incident(e):
                out[:, e - 1] = (out[:, e - 1] << 1) | bits[:, index[(e, j)]]
        for j, members in enumerate(self.instance.sets, start=1):
            parity = np.zeros(bits.shape[0], dtype=np.int64)
            for e in members:
                parity ^= bits[:, index[(e, j)]]
            out[:, self.instance.m + j - 1] = parity
        return out

    def edge_bits(self, x: Sequence[int]) -> dict[tuple[int, int], int]:
        bits = {}
        for e in range(1, self.instance.m + 1):
            incident = self.instance.incident(e)
            for t, j in enumerate(incident):
                bits[(e, j)] = (int(x[e - 1]) >> (len(incident) - 1 - t)) & 1
        return bits

    def joint_prob(self, x: Sequence[int]) -> float:
        x = self.validate(x)
        bits = self.edge_bits(x)
        for j, members in enumerate(self.instance.sets, start=1):
            parity = 0
            for e in members:
                parity ^= bits[(e, j)]
            if parity != x[self.instance.m + j - 1]:
                return 0.0
        return 2.0 ** -len(self.instance.edges)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_many(rng, 1)[0]

    def sample_many(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.assemble(rng.integers(0, 2, size=(count, len(self.instance.edges))))

    def enumerate_support(self, keep_zeros: bool = False, budget: int = 1 << MAX_PARITY_EDGES) -> Support:
        if keep_zeros:
            return super().enumerate_support(keep_zeros=True, budget=budget)
        edges = len(self.instance.edges)
        if 1 << edges > budget:
            raise CapacityError(f"{edges} edges exceed the enumeration limit")
        points = self.assemble(assignments((2,) * edges, range(edges)))
        return Support(points, np.full(points.shape[0], 2.0**-edges), self.arities)


def build_parity_model(instance: HittingSetInstance) -> ParityModel:
    return ParityModel(instance)


def _check_order(instance: HittingSetInstance, order: Sequence[int]) -> tuple[int, ...]:
    order = tuple(int(e) for e in order)
    if sorted(order) != list(range(1, instance.m + 1)):
        raise InputError(f"{list(order)} is not an ordering of 1..{instance.m}")
    return order


def parity_ordering(instance: HittingSetInstance, order: Sequence[int], sensitive_first: bool = True) -> Ordering:
    """Mechanism ordering over all m + k positions: the element order plus the parity positions."""
    elements = [e - 1 for e in _check_order(instance, order)]
    parities = list(range(instance.m, instance.m + instance.k))
    return Ordering(tuple(parities + elements if sensitive_first else elements + parities))


def deterministic_erasure_set(instance: HittingSetInstance, order: Sequence[int]) -> frozenset[int]:
    """Erase element o iff some set is contained in (elements released so far) + {o}."""
    released: set[int] = set()
    erased: set[int] = set()
    for element in _check_order(instance, order):
        candidate = released | {element}
        if any(s <= candidate for s in instance.sets):
            erased.add(element)
        else:
            released.add(element)
    return frozenset(erased)


def mechanism_erasure_sets(
    instance: HittingSetInstance, order: Sequence[int], sensitive_first: bool = True
) -> dict[frozenset[int], float] | None:
    """Run the generic mechanism on the parity model for every bit assignment.

    Returns the probability of each erased element set, or None if some
    release probability is neither 0 nor 1.
    """
    model = build_parity_model(instance)
    support = model.support
    ordering = parity_ordering(instance, order, sensitive_first)
    outcomes: dict[frozenset[int], float] = {}
    for node in walk_prefixes(support, model.sensitive, ordering):
        if not node.is_leaf:
            if not np.all(np.isclose(node.release, 0.0) | np.isclose(node.release, 1.0)):
                return None
            continue
        mass = float((support.probs * node.kernel).sum())
        if mass > 0:
            y = node.output(model.n)
            erased = frozenset(e for e in range(1, instance.m + 1) if y[e - 1] == ERASED)
            outcomes[erased] = outcomes.get(erased, 0.0) + mass
    return outcomes


def verify_deterministic_rule(instance: HittingSetInstance, order: Sequence[int]) -> bool:
    """Whether the mechanism is deterministic here and erases exactly `deterministic_erasure_set`."""
    outcomes = mechanism_erasure_sets(instance, order)
    if outcomes is None:
        return False
    expected = deterministic_erasure_set(instance, order)
    return set(outcomes) == {expected} and np.isclose(outcomes[expected], 1.0)


def best_ordering_exhaustive(
    instance: HittingSetInstance, limit: int = MAX_ORDERING_UNIVERSE
) -> tuple[int, tuple[int, ...]]:
    """(e*, first ordering attaining it) over all m! element orderings."""
    if instance.m > limit:
        raise CapacityError(f"{instance.m}! orderings exceed the search limit (m <= {limit})")
    best: tuple[int, tuple[int, ...]] | None = None
    for order in itertools.permutations(range(1, instance.m + 1)):
        size = len(deterministic_erasure_set(instance, order))
        if best is None or size < best[0]:
            best = (size, order)
    return best


def is_hitting_set(instance: HittingSetInstance, candidate: Iterable[int]) -> bool:
    chosen = frozenset(candidate)
    return all(s & chosen for s in instance.sets)


def min_hitting_set_bruteforce(
    instance: HittingSetInstance, limit: int = MAX_HITTING_UNIVERSE
) -> tuple[int, frozenset[int]]:
    if instance.m > limit:
        raise CapacityError(f"2^{instance.m} subsets exceed the search limit (m <= {limit})")
    for size in range(1, instance.m + 1):
        for subset in itertools.combinations(range(1, instance.m + 1), size):
            if is_hitting_set(instance, subset):
                return size, frozenset(subset)
    raise InputError("no hitting set exists")


def hitting_set_ordering(instance: HittingSetInstance, hitting_set: Iterable[int]) -> tuple[int, ...]:
    """Visit elements outside `hitting_set` first; the result erases at most |hitting_set| elements."""
    chosen = frozenset(hitting_set)
    if not is_hitting_set(instance, chosen):
        raise InputError(f"{sorted(chosen)} is not a hitting set")
    rest = [e for e in range(1, instance.m + 1) if e not in chosen]
    return tuple(rest + sorted(chosen))


def random_instance(m: int, k: int, rng: np.random.Generator, density: float = 0.5) -> HittingSetInstance:
    """k random non-empty subsets of 1..m, patched so every element is covered."""
    if m < 1 or k < 1:
        raise InputError("m and k must be positive")
    sets = []
    for _ in range(k):
        members = {e for e in range(1, m + 1) if rng.random() < density}
        if not members:
            members = {int(rng.integers(1, m + 1))}
        sets.append(members)
    covered = set().union(*sets)
    for e in range(1, m + 1):
        if e not in covered:
            sets[int(rng.integers(k))].add(e)
    return HittingSetInstance(m, tuple(frozenset(s) for s in sets))


@dataclass(frozen=True)
class HardnessResult:
    e_star: int
    h_star: int
    ordering: tuple[int, ...]
    witness: frozenset[int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "e_star": self.e_star,
            "h_star": self.h_star,
            "ordering": list(self.ordering),
            "witness": sorted(self.witness),
        }


def solve(instance: HittingSetInstance) -> HardnessResult:
    e_star, ordering = best_ordering_exhaustive(instance)
    h_star, witness = min_hitting_set_bruteforce(instance)
    logger.info("e* = %d, h* = %d for m = %d, k = %d", e_star, h_star, instance.m, instance.k)
    return HardnessResult(e_star, h_star, ordering, witness)
