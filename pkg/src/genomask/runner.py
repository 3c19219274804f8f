from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pandas as pd
from tqdm import tqdm

from genomask.config import ExperimentConfig
from genomask.errors import CapacityError, GenomaskError, InputError, NumericalError
from genomask.experiments import COLUMNS, EXPERIMENTS, Experiment, ExperimentInfo, GridPoint, ResultRow
from genomask.rng import stream

logger = logging.getLogger(__name__)


def _status_of(exc: GenomaskError) -> str:
    if isinstance(exc, CapacityError):
        return "capacity"
    if isinstance(exc, NumericalError):
        return "numerical"
    if isinstance(exc, InputError):
        return "input"
    return "error"


class ExperimentRunner:
    """Evaluates every grid point of one experiment and gathers the rows in grid order.

    Point i draws from the stream keyed (i,) under the config's root seed, so
    the rows do not depend on the number of workers or on scheduling.
    """

    def __init__(self, config: ExperimentConfig, experiments: dict[str, Experiment] | None = None):
        registry = EXPERIMENTS if experiments is None else experiments
        if config.name not in registry:
            raise InputError(f"no experiment named '{config.name}'")
        self._config = config
        self._experiment = registry[config.name]

    def info(self) -> ExperimentInfo:
        return self._experiment.info()

    def _evaluate(self, point: GridPoint) -> list[ResultRow]:
        try:
            return self._experiment.evaluate(self._config, point, stream(self._config.seed, point.index))
        except GenomaskError as exc:
            logger.warning("grid point %d failed: %s", point.index, exc)
            row = self._experiment.row(self._config, point, "error", math.nan, status=_status_of(exc))
            return [row]

    def run(self, progress: bool = False) -> pd.DataFrame:
        points = self._experiment.grid(self._config)
        logger.info("running %s over %d grid points", self._config.name, len(points))

        with ThreadPoolExecutor(max_workers=self._config.workers) as pool:
            batches = list(
                tqdm(pool.map(self._evaluate, points), total=len(points), desc=self._config.name, disable=not progress)
            )

        rows = [row.to_dict() for batch in batches for row in batch]
        logger.info("%s finished with %d rows", self._config.name, len(rows))
        return pd.DataFrame(rows, columns=list(COLUMNS))


def write_results(frame: pd.DataFrame, path: str | Path | None, json_path: str | Path | None = None) -> str | None:
    """Write the CSV to `path`, or return it as text when `path` is None."""
    text = frame.to_csv(path, index=False, float_format="%.12g")
    if json_path is not None:
        frame.to_json(json_path, orient="records", indent=2)
    return text
