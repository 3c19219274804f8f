"""Tolerances, budgets and experiment configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from genomask.errors import InputError
from genomask.rng import MAX_SEED

# Release probabilities that leave [0, 1] by at most this much are clamped silently.
CLAMP_TOLERANCE = 1e-12
# Anything further out than this is a logic bug, not round-off.
CONSISTENCY_TOLERANCE = 1e-9
# Belief tables must renormalize to 1 within this.
NORMALIZATION_TOLERANCE = 1e-6

# Upper limit on |support| * 2^n (input sequences times erasure masks).
ENUMERATION_BUDGET = 1 << 24
# Upper limit on |support| * 2^n LP variables.
LP_VARIABLE_BUDGET = 1 << 15
# The HMM session loops over |X|^|K| sensitive assignments per step.
MAX_HMM_SENSITIVE = 12
# Exhaustive ordering search is m!.
MAX_ORDERING_UNIVERSE = 8
# Brute-force hitting set is 2^m.
MAX_HITTING_UNIVERSE = 20
# The parity model enumerates 2^edges bit assignments.
MAX_PARITY_EDGES = 16

EXPERIMENT_NAMES = ("fig3", "fig4", "fig5", "robustness", "hardness", "complexity")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one `genomask experiment` invocation.

    `sensitive` is 0-based here; files and flags carry 1-based indices and are
    converted on load.
    """

    name: str
    seed: int = 0
    runs: int = 1000
    samples: int = 1000
    panel_path: Path | None = None
    model: dict[str, Any] | None = None
    m: int = 100
    n: int = 100
    alphabet: int = 2
    sensitive: tuple[int, ...] = (0,)
    epsilons: tuple[float, ...] = (0.1,)
    thetas: tuple[float, ...] = (0.01,)
    omegas: tuple[int, ...] = (0,)
    truncate: int = 6
    sizes: tuple[int, ...] = (25, 50, 100, 200)
    output: Path | None = None
    workers: int = 1
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in EXPERIMENT_NAMES:
            raise InputError(
                f"unknown experiment '{self.name}', expected one of {', '.join(EXPERIMENT_NAMES)}"
            )
        for grid_name in ("epsilons", "thetas", "omegas", "sizes"):
            if not getattr(self, grid_name):
                raise InputError(f"grid '{grid_name}' must be non-empty")
        if self.runs < 1 or self.samples < 1:
            raise InputError("runs and samples must be at least 1")
        if not 0 <= self.seed <= MAX_SEED:
            raise InputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.m < 1 or self.n < 1 or self.alphabet < 2:
            raise InputError("panel dimensions must be positive and alphabet at least 2")
        if any(k < 0 for k in self.sensitive):
            raise InputError("sensitive indices must be positive (1-based)")
        if self.workers < 1:
            raise InputError("workers must be at least 1")

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
        """Build a config from JSON-style data (1-based `sensitive`)."""
        known = {f.name for f in fields(cls)}
        kwargs: dict[str, Any] = {}
        extra: dict[str, Any] = {}
        for key, value in data.items():
            if key not in known:
                extra[key] = value
                continue
            kwargs[key] = value
        try:
            if "sensitive" in kwargs:
                kwargs["sensitive"] = tuple(int(k) - 1 for k in kwargs["sensitive"])
            for grid_name in ("epsilons", "thetas"):
                if grid_name in kwargs:
                    kwargs[grid_name] = tuple(float(v) for v in kwargs[grid_name])
            for grid_name in ("omegas", "sizes"):
                if grid_name in kwargs:
                    kwargs[grid_name] = tuple(int(v) for v in kwargs[grid_name])
        except (TypeError, ValueError) as exc:
            raise InputError(f"malformed experiment grid: {exc}") from exc
        for path_name in ("panel_path", "output"):
            if kwargs.get(path_name) is not None:
                path = Path(kwargs[path_name])
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                kwargs[path_name] = path
        return cls(**kwargs, extra=extra)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read experiment config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError(f"experiment config {path} must be a JSON object")
        return cls.from_dict(data, base_dir=path.parent)
