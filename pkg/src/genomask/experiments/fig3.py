"""Window baseline against the mechanism on a full-length HMM.

For every (epsilon, theta) the mechanism's Monte-Carlo erasure rate is one
point, and each window size omega is another, reporting the baseline's
normalized leakage next to its (deterministic) erasure rate.
"""

from __future__ import annotations

import itertools

import numpy as np

from genomask.baselines import WindowPolicy, window_leakage_mc
from genomask.config import ExperimentConfig
from genomask.experiments.base import Experiment, GridPoint, ResultRow, hmm_for, load_panel
from genomask.hmm import hmm_rate_mc


class WindowBaseline(Experiment):
    name = "fig3"
    description = "Mechanism erasure rate versus window-baseline leakage"

    def grid(self, config: ExperimentConfig) -> list[GridPoint]:
        panel = load_panel(config)
        m, n = panel.shape
        points = []
        for epsilon, theta in itertools.product(config.epsilons, config.thetas):
            common = {"epsilon": epsilon, "theta": theta, "n": n, "m": m}
            points.append(GridPoint(len(points), {**common, "kind": "mechanism"}))
            for omega in config.omegas:
                points.append(GridPoint(len(points), {**common, "kind": "window", "omega": omega}))
        return points

    def evaluate(self, config: ExperimentConfig, point: GridPoint, rng: np.random.Generator) -> list[ResultRow]:
        hmm = hmm_for(config, load_panel(config), point["epsilon"], point["theta"])
        if point["kind"] == "mechanism":
            rate, stderr = hmm_rate_mc(hmm, config.sensitive, config.runs, rng)
            return [self.row(config, point, "mechanism_erasure_rate", 1.0 - rate, stderr=stderr)]

        policy = WindowPolicy(config.extra.get("window_mode", "prefix"), point["omega"])
        leakage, stderr = window_leakage_mc(hmm, config.sensitive, policy, config.samples, rng)
        return [
            self.row(config, point, "window_erasure_rate", policy.erasure_rate(hmm.n, config.sensitive)),
            self.row(config, point, "window_leakage", leakage, stderr=stderr),
        ]
