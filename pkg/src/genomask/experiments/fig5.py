"""Mechanism, LP optimum and converse bound on short truncations of the panel.

Truncation keeps the first `truncate` columns and leaves epsilon and theta
unchanged; the `n` column of each row holds the truncated length.
"""

from __future__ import annotations

import itertools

import numpy as np

from genomask.bounds import lp_optimal_rate, upper_bound_rate
from genomask.config import ExperimentConfig
from genomask.experiments.base import Experiment, GridPoint, ResultRow, hmm_for, load_panel
from genomask.mechanism import achievable_rate_exact


class LpSandwich(Experiment):
    name = "fig5"
    description = "Exact mechanism rate, LP-optimal rate and upper bound on truncated HMMs"

    def grid(self, config: ExperimentConfig) -> list[GridPoint]:
        m, _ = load_panel(config).shape
        return [
            GridPoint(index, {"epsilon": epsilon, "theta": theta, "n": config.truncate, "m": m})
            for index, (theta, epsilon) in enumerate(itertools.product(config.thetas, config.epsilons))
        ]

    def evaluate(self, config: ExperimentConfig, point: GridPoint, rng: np.random.Generator) -> list[ResultRow]:
        hmm = hmm_for(config, load_panel(config), point["epsilon"], point["theta"]).truncated(config.truncate)
        solution = lp_optimal_rate(hmm, config.sensitive)
        return [
            self.row(config, point, "mechanism", achievable_rate_exact(hmm, config.sensitive), stderr=0.0),
            self.row(config, point, "lp", solution.optimal_rate, stderr=0.0, status=solution.status),
            self.row(config, point, "bound", upper_bound_rate(hmm, config.sensitive), stderr=0.0),
        ]
