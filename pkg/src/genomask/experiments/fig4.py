"""Achieved rate and converse bound across crossover and error probabilities."""

from __future__ import annotations

import itertools

import numpy as np

from genomask.bounds import upper_bound_rate
from genomask.config import ExperimentConfig
from genomask.experiments.base import Experiment, GridPoint, ResultRow, hmm_for, load_panel
from genomask.hmm import hmm_rate_mc


class RateVersusCrossover(Experiment):
    name = "fig4"
    description = "Mechanism rate and upper bound for each (epsilon, theta)"

    def grid(self, config: ExperimentConfig) -> list[GridPoint]:
        m, n = load_panel(config).shape
        return [
            GridPoint(index, {"epsilon": epsilon, "theta": theta, "n": n, "m": m})
            for index, (theta, epsilon) in enumerate(itertools.product(config.thetas, config.epsilons))
        ]

    def evaluate(self, config: ExperimentConfig, point: GridPoint, rng: np.random.Generator) -> list[ResultRow]:
        hmm = hmm_for(config, load_panel(config), point["epsilon"], point["theta"])
        rate, stderr = hmm_rate_mc(hmm, config.sensitive, config.runs, rng)
        return [
            self.row(config, point, "rate", rate, stderr=stderr),
            self.row(config, point, "bound", upper_bound_rate(hmm, config.sensitive), stderr=0.0),
        ]
