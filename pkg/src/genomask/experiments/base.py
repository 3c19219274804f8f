from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from genomask.config import ExperimentConfig
from genomask.distributions import Alphabet, HmmModel, generate_panel, model_from_dict, read_panel
from genomask.errors import InputError
from genomask.rng import stream


@dataclass
class ExperimentInfo:
    name: str
    description: str


@dataclass(frozen=True)
class GridPoint:
    """One parameter combination; `values` fill the matching CSV columns."""

    index: int
    values: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)


@dataclass
class ResultRow:
    experiment: str
    point: int
    metric: str
    value: float
    stderr: float = math.nan
    status: str = "ok"
    epsilon: float = math.nan
    theta: float = math.nan
    omega: float = math.nan
    n: int | None = None
    m: int | None = None
    sensitive: str = ""
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


COLUMNS = tuple(ResultRow.__dataclass_fields__)


class Experiment(ABC):
    """A named sweep: a grid of points, each evaluated into result rows."""

    name: str = ""
    description: str = ""

    def info(self) -> ExperimentInfo:
        return ExperimentInfo(name=self.name, description=self.description)

    @abstractmethod
    def grid(self, config: ExperimentConfig) -> list[GridPoint]: ...

    @abstractmethod
    def evaluate(
        self, config: ExperimentConfig, point: GridPoint, rng: np.random.Generator
    ) -> list[ResultRow]: ...

    def row(self, config: ExperimentConfig, point: GridPoint, metric: str, value: float, **extra) -> ResultRow:
        """A result row pre-filled with the point's parameters and the run's provenance."""
        columns = {key: point.values[key] for key in ("epsilon", "theta", "omega", "n", "m") if key in point.values}
        columns.update(extra)
        return ResultRow(
            experiment=self.name,
            point=point.index,
            metric=metric,
            value=float(value),
            sensitive=",".join(str(k + 1) for k in config.sensitive),
            seed=config.seed,
            **columns,
        )


def load_panel(config: ExperimentConfig) -> np.ndarray:
    """The panel named by the config, or a fresh uniform one drawn from the root seed."""
    if config.panel_path is not None:
        return read_panel(config.panel_path)
    if config.model is not None:
        model = model_from_dict(config.model)
        if not isinstance(model, HmmModel):
            raise InputError("this experiment needs an HMM model")
        return model.panel
    return generate_panel(config.m, config.n, config.alphabet, stream(config.seed))


def hmm_for(config: ExperimentConfig, panel: np.ndarray, epsilon: float, theta: float) -> HmmModel:
    return HmmModel(panel, epsilon, theta, Alphabet(max(config.alphabet, int(panel.max()) + 1)))
