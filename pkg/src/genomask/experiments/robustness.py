"""Leakage of a mechanism built for the wrong crossover probability.

The true law p uses `epsilon`; the mechanism is built from q, the same panel
with crossover probability `q_epsilon` (config key `q_epsilons`, default the
epsilon grid itself). Each point reports q_epsilon, the exact leakage under p,
the bound D(p || q), and the leakage measured under q.

When `truncate` leaves too many positions to enumerate, the leakage rows carry
status ``capacity`` and D(p || q) is sampled from `samples` sequences.
"""

from __future__ import annotations

import itertools

import numpy as np

from genomask.baselines import MismatchPair, estimate_robustness
from genomask.config import ExperimentConfig
from genomask.experiments.base import Experiment, GridPoint, ResultRow, hmm_for, load_panel


class ModelMismatch(Experiment):
    name = "robustness"
    description = "Exact leakage under model mismatch against the KL bound"

    def grid(self, config: ExperimentConfig) -> list[GridPoint]:
        m, _ = load_panel(config).shape
        q_epsilons = tuple(float(v) for v in config.extra.get("q_epsilons", config.epsilons))
        combos = itertools.product(config.thetas, config.epsilons, q_epsilons)
        return [
            GridPoint(index, {"epsilon": epsilon, "theta": theta, "q_epsilon": q_epsilon, "n": config.truncate, "m": m})
            for index, (theta, epsilon, q_epsilon) in enumerate(combos)
        ]

    def evaluate(self, config: ExperimentConfig, point: GridPoint, rng: np.random.Generator) -> list[ResultRow]:
        panel = load_panel(config)
        p_model = hmm_for(config, panel, point["epsilon"], point["theta"]).truncated(config.truncate)
        q_model = hmm_for(config, panel, point["q_epsilon"], point["theta"]).truncated(config.truncate)
        result = estimate_robustness(MismatchPair(p_model, q_model), config.sensitive, config.samples, rng)
        status = "ok" if result.exact else "capacity"
        return [
            self.row(config, point, "q_epsilon", point["q_epsilon"]),
            self.row(config, point, "leakage", result.leakage, stderr=0.0, status=status),
            self.row(config, point, "kl_bound", result.kl_bound, stderr=result.kl_stderr),
            self.row(config, point, "q_self_leakage", result.q_self_leakage, stderr=0.0, status=status),
        ]
