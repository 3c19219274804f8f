from genomask.experiments.base import (
    COLUMNS,
    Experiment,
    ExperimentInfo,
    GridPoint,
    ResultRow,
)
from genomask.experiments.complexity import MaskingComplexity
from genomask.experiments.fig3 import WindowBaseline
from genomask.experiments.fig4 import RateVersusCrossover
from genomask.experiments.fig5 import LpSandwich
from genomask.experiments.hardness import OrderingHardness
from genomask.experiments.robustness import ModelMismatch

EXPERIMENTS: dict[str, Experiment] = {
    experiment.name: experiment
    for experiment in (
        WindowBaseline(),
        RateVersusCrossover(),
        LpSandwich(),
        ModelMismatch(),
        OrderingHardness(),
        MaskingComplexity(),
    )
}

__all__ = ["COLUMNS", "EXPERIMENTS", "Experiment", "ExperimentInfo", "GridPoint", "ResultRow"]
