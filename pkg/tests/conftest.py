import itertools
from pathlib import Path

import numpy as np
import pytest

from genomask.config import ExperimentConfig
from genomask.distributions import (
    Alphabet,
    ExplicitJointModel,
    HmmModel,
    MarkovChainModel,
    generate_panel,
    write_panel,
)
from genomask.hardness import HittingSetInstance
from genomask.mechanism import Ordering
from genomask.rng import stream


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_markov(n: int, stay: float = 0.9, alphabet: int = 2) -> MarkovChainModel:
    """Uniform start, keep the previous symbol with probability `stay`."""
    return MarkovChainModel.sticky(n, stay, alphabet)


def make_independent(marginals: list[list[float]]) -> ExplicitJointModel:
    """Explicit model whose positions are independent with the given marginals."""
    table = np.ones(())
    for marginal in marginals:
        table = np.multiply.outer(table, np.asarray(marginal, dtype=float))
    return ExplicitJointModel(len(marginals), Alphabet(len(marginals[0])), table / table.sum())


def random_explicit(n: int, rng: np.random.Generator, alphabet: int = 2) -> ExplicitJointModel:
    table = rng.dirichlet(np.ones(alphabet**n))
    return ExplicitJointModel(n, Alphabet(alphabet), table)


def random_markov(n: int, rng: np.random.Generator, alphabet: int = 2) -> MarkovChainModel:
    initial = rng.dirichlet(np.ones(alphabet))
    transition = rng.dirichlet(np.ones(alphabet), size=alphabet)
    return MarkovChainModel(n, Alphabet(alphabet), initial, transition)


def make_hmm(m: int, n: int, epsilon: float = 0.2, theta: float = 0.1, seed: int = 0) -> HmmModel:
    panel = np.random.default_rng(seed).integers(0, 2, size=(m, n))
    return HmmModel(panel, epsilon, theta, Alphabet(2))


def random_hmm(m: int, n: int, rng: np.random.Generator) -> HmmModel:
    panel = rng.integers(0, 2, size=(m, n))
    return HmmModel(panel, float(rng.uniform(0.05, 0.4)), float(rng.uniform(0.01, 0.3)), Alphabet(2))


def random_ordering(n: int, rng: np.random.Generator) -> Ordering:
    return Ordering(tuple(int(p) for p in rng.permutation(n)))


def random_sensitive(n: int, rng: np.random.Generator, max_size: int = 2) -> tuple[int, ...]:
    size = int(rng.integers(1, max_size + 1))
    return tuple(sorted(int(k) for k in rng.choice(n, size=size, replace=False)))


def state_paths(m: int, n: int):
    """Every hidden-state path of length n over m states."""
    return itertools.product(range(m), repeat=n)


def path_probability(hmm: HmmModel, path) -> float:
    prob = 1.0 / hmm.m
    for prev, cur in zip(path[:-1], path[1:]):
        prob *= hmm.transition[prev, cur]
    return prob


def make_instance(m: int, *sets) -> HittingSetInstance:
    """Hitting-set instance over 1..m from 1-based element lists."""
    return HittingSetInstance(m, tuple(frozenset(s) for s in sets))


def write_panel_file(directory: Path, m: int, n: int, seed: int = 0) -> Path:
    path = directory / "panel.txt"
    write_panel(path, generate_panel(m, n, 2, stream(seed)))
    return path


def make_config(name: str, **overrides) -> ExperimentConfig:
    """A config small enough for tests; `sensitive` is 1-based as in files."""
    data = {"name": name, "m": 3, "n": 6, "runs": 20, "samples": 50, "truncate": 4, **overrides}
    return ExperimentConfig.from_dict(data)
