"""Optimal ordering versus minimum hitting set on random instances.

Config keys: `universe` (m, default 5), `sets` (k, default 4) and
`instances` (default 50). Instance i is drawn from its own stream, so any
single row can be regenerated.
"""

from __future__ import annotations

import numpy as np

from genomask.config import ExperimentConfig
from genomask.experiments.base import Experiment, GridPoint, ResultRow
from genomask.hardness import random_instance, solve


class OrderingHardness(Experiment):
    name = "hardness"
    description = "Exhaustive best ordering e* against brute-force hitting set h*"

    def grid(self, config: ExperimentConfig) -> list[GridPoint]:
        universe = int(config.extra.get("universe", 5))
        sets = int(config.extra.get("sets", 4))
        return [
            GridPoint(index, {"m": universe, "k": sets})
            for index in range(int(config.extra.get("instances", 50)))
        ]

    def evaluate(self, config: ExperimentConfig, point: GridPoint, rng: np.random.Generator) -> list[ResultRow]:
        instance = random_instance(point["m"], point["k"], rng)
        result = solve(instance)
        status = "ok" if result.e_star == result.h_star else "mismatch"
        return [
            self.row(config, point, "e_star", result.e_star, status=status, n=instance.m + instance.k),
            self.row(config, point, "h_star", result.h_star, status=status, n=instance.m + instance.k),
        ]
