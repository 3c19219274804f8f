"""Runtime of HMM masking as the sequence length n and the panel size m grow.

Each axis is one grid point: it times `mask_hmm` at every size in `sizes`
(the other dimension fixed at the config's n or m), then fits the log-log
slope. Timings are wall-clock and not reproducible byte for byte.
"""

from __future__ import annotations

import time

import numpy as np

from genomask.config import ExperimentConfig
from genomask.distributions import Alphabet, HmmModel, generate_panel
from genomask.experiments.base import Experiment, GridPoint, ResultRow
from genomask.hmm import backward_gamma, mask_hmm


def time_masking(hmm: HmmModel, sensitive, repeats: int, rng: np.random.Generator) -> float:
    """Mean seconds per masked sequence, gamma pass included."""
    samples = hmm.sample_many(rng, repeats)
    start = time.perf_counter()
    for x in samples:
        mask_hmm(hmm, x, sensitive, rng, gamma=backward_gamma(hmm, sensitive))
    return (time.perf_counter() - start) / repeats


def loglog_slope(sizes, seconds) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(sizes, dtype=float)), np.log(np.asarray(seconds)), 1)
    return float(slope)


class MaskingComplexity(Experiment):
    name = "complexity"
    description = "Masking runtime against n and m with log-log slopes"

    def grid(self, config: ExperimentConfig) -> list[GridPoint]:
        return [GridPoint(0, {"axis": "n"}), GridPoint(1, {"axis": "m"})]

    def evaluate(self, config: ExperimentConfig, point: GridPoint, rng: np.random.Generator) -> list[ResultRow]:
        repeats = int(config.extra.get("repeats", 3))
        epsilon, theta = config.epsilons[0], config.thetas[0]
        rows, seconds = [], []
        for size in config.sizes:
            m, n = (config.m, size) if point["axis"] == "n" else (size, config.n)
            panel = generate_panel(m, n, config.alphabet, rng)
            hmm = HmmModel(panel, epsilon, theta, Alphabet(config.alphabet))
            elapsed = time_masking(hmm, config.sensitive, repeats, rng)
            seconds.append(elapsed)
            rows.append(self.row(config, point, "seconds", elapsed, epsilon=epsilon, theta=theta, n=n, m=m))
        rows.append(
            self.row(config, point, f"slope_{point['axis']}", loglog_slope(config.sizes, seconds), epsilon=epsilon, theta=theta)
        )
        return rows
