"""Command-line front end.

Positions on the command line and in every file are 1-based.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Callable
from pathlib import Path

import click
import pandas as pd

from genomask.baselines import (
    MismatchPair,
    WindowPolicy,
    estimate_robustness,
    window_leakage_exact,
    window_leakage_mc,
)
from genomask.bounds import lp_optimal_rate, upper_bound_rate
from genomask.config import EXPERIMENT_NAMES, MAX_PARITY_EDGES, ExperimentConfig
from genomask.distributions import (
    HmmModel,
    SequenceModel,
    generate_panel,
    load_model,
    parse_symbol,
    read_panel,
    symbol_char,
    write_panel,
)
from genomask.errors import CapacityError, GenomaskError, InputError, NumericalError
from genomask.hardness import HittingSetInstance, random_instance, solve, verify_deterministic_rule
from genomask.hmm import mask_hmm
from genomask.mechanism import Ordering, achievable_rate_exact, achievable_rate_mc, mask_sequence
from genomask.rng import stream
from genomask.runner import ExperimentRunner, write_results

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)-8s %(message)s"


class _Group(click.Group):
    """Maps toolkit errors to their exit codes."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except GenomaskError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(exc.exit_code)


def parse_positions(text: str) -> tuple[int, ...]:
    """``"1,3"`` -> (0, 2)."""
    try:
        positions = tuple(int(v) - 1 for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise InputError(f"malformed position list {text!r}") from exc
    if any(p < 0 for p in positions):
        raise InputError("positions are 1-based")
    return positions


def parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise InputError(f"malformed number list {text!r}") from exc


def parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise InputError(f"expected whole numbers, got {text!r}") from exc


def model_options(func: Callable) -> Callable:
    func = click.option("--truncate", type=int, default=None, help="Keep only the first N positions of an HMM.")(func)
    func = click.option("--theta", type=float, default=0.01, show_default=True, help="HMM error probability.")(func)
    func = click.option("--epsilon", type=float, default=0.1, show_default=True, help="HMM crossover probability.")(func)
    func = click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), help="Model JSON file.")(func)
    func = click.option("--panel", type=click.Path(exists=True, dir_okay=False), help="Reference panel file.")(func)
    return func


def resolve_model(panel: str | None, model_path: str | None, epsilon: float, theta: float, truncate: int | None) -> SequenceModel:
    if model_path is not None:
        model = load_model(model_path)
    elif panel is not None:
        model = HmmModel(read_panel(panel), epsilon, theta)
    else:
        raise InputError("either --panel or --model is required")
    if truncate is not None:
        if not isinstance(model, HmmModel):
            raise InputError("--truncate applies to HMM models only")
        model = model.truncated(truncate)
    return model


def _ordering(order: str | None) -> Ordering | None:
    return Ordering.parse(order) if order else None


def _emit(payload: dict, as_json: bool, text: str) -> None:
    click.echo(json.dumps(payload) if as_json else text)


@click.group(cls=_Group)
@click.option("-v", "--verbose", count=True, help="-v for progress messages, -vv for debugging.")
def cli(verbose: int):
    """Hide sensitive positions of a sequence by erasing symbols, with exact and sampled checks."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(format=LOG_FORMAT, level=level, datefmt="%Y-%m-%d %H:%M:%S")


@cli.command("gen-panel")
@click.option("--m", "rows", type=int, default=100, show_default=True, help="Number of haplotypes.")
@click.option("--n", "length", type=int, default=100, show_default=True, help="Positions per haplotype.")
@click.option("--alphabet", type=int, default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default stdout).")
def gen_panel(rows: int, length: int, alphabet: int, seed: int, out: str | None):
    """Write a uniform random reference panel, one haplotype per line."""
    if alphabet < 2:
        raise InputError("alphabet must have at least two symbols")
    panel = generate_panel(rows, length, alphabet, stream(seed))
    if out is None:
        for row in panel:
            click.echo("".join(symbol_char(int(v)) for v in row))
    else:
        write_panel(out, panel)


@cli.command()
@model_options
@click.option("--k", "sensitive", default="1", show_default=True, help="Sensitive positions, e.g. 1,5.")
@click.option("--input", "input_text", default=None, help="Sequence to mask, one character per symbol.")
@click.option("--sample", is_flag=True, help="Mask a sequence sampled from the model.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--order", default=None, help="Processing order, e.g. 3,1,2 (default linear).")
@click.option("--transcript", type=click.Path(dir_okay=False), default=None, help="Write JSON-lines decisions here.")
@click.option("--json", "as_json", is_flag=True, help="Print a JSON object instead of the masked text.")
def mask(panel, model_path, epsilon, theta, truncate, sensitive, input_text, sample, seed, order, transcript, as_json):
    """Mask one sequence; '*' marks an erased position."""
    model = resolve_model(panel, model_path, epsilon, theta, truncate)
    positions = parse_positions(sensitive)
    if sample == (input_text is not None):
        raise InputError("give exactly one of --input and --sample")
    x = model.sample(stream(seed, 0)) if sample else [parse_symbol(c) for c in input_text.strip()]
    x = model.validate(x)
    rng = stream(seed, 1)
    ordering = _ordering(order)
    if isinstance(model, HmmModel) and (ordering is None or ordering.is_linear):
        y, record = mask_hmm(model, x, positions, rng)
    else:
        y, record = mask_sequence(model, x, positions, ordering, rng)
    if transcript is not None:
        Path(transcript).write_text(record.to_jsonl())
    payload = {
        "input": "".join(symbol_char(int(v)) for v in x),
        "output": y.to_text(),
        "erasures": y.erasures,
        "sensitive": [k + 1 for k in positions],
        "seed": seed,
    }
    _emit(payload, as_json, y.to_text())


@cli.command()
@model_options
@click.option("--k", "sensitive", default="1", show_default=True)
@click.option("--runs", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--order", default=None)
@click.option("--exact", is_flag=True, help="Enumerate instead of sampling (small n only).")
@click.option("--json", "as_json", is_flag=True)
def rate(panel, model_path, epsilon, theta, truncate, sensitive, runs, seed, order, exact, as_json):
    """Achievable rate: 1 minus the expected fraction of erasures."""
    model = resolve_model(panel, model_path, epsilon, theta, truncate)
    positions = parse_positions(sensitive)
    if exact:
        value, stderr = achievable_rate_exact(model, positions, _ordering(order)), 0.0
    else:
        value, stderr = achievable_rate_mc(model, positions, runs, stream(seed, 0), _ordering(order))
    _emit({"rate": value, "stderr": stderr, "seed": seed}, as_json, f"{value:.6f}\t{stderr:.6f}")


@cli.command()
@model_options
@click.option("--k", "sensitive", default="1", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def bound(panel, model_path, epsilon, theta, truncate, sensitive, as_json):
    """Upper bound on the rate of any perfectly private erasure mechanism."""
    model = resolve_model(panel, model_path, epsilon, theta, truncate)
    value = upper_bound_rate(model, parse_positions(sensitive))
    _emit({"bound": value}, as_json, f"{value:.6f}")


@cli.command()
@model_options
@click.option("--k", "sensitive", default="1", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Print the full solution with its mechanism.")
def lp(panel, model_path, epsilon, theta, truncate, sensitive, as_json):
    """Optimal rate by linear programming (tiny n only)."""
    model = resolve_model(panel, model_path, epsilon, theta, truncate)
    solution = lp_optimal_rate(model, parse_positions(sensitive))
    if solution.status == "capacity":
        raise CapacityError(f"LP needs {solution.variable_count} variables")
    if solution.status != "optimal":
        raise NumericalError(f"LP solver finished with status {solution.status}")
    click.echo(solution.to_json() if as_json else f"{solution.optimal_rate:.6f}\t{solution.status}")


@cli.command()
@model_options
@click.option("--k", "sensitive", default="1", show_default=True)
@click.option("--omega", default="0", show_default=True, help="Window sizes, e.g. 0,10,20.")
@click.option("--mode", type=click.Choice(["prefix", "radius"]), default="prefix", show_default=True)
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--exact", is_flag=True, help="Enumerate instead of sampling (small n only).")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--json", "as_json", is_flag=True)
def window(panel, model_path, epsilon, theta, truncate, sensitive, omega, mode, samples, seed, exact, out, as_json):
    """Normalized leakage of the window-erasure baseline.

    Columns: experiment, omega, erasure_rate, leakage, stderr, seed.
    """
    model = resolve_model(panel, model_path, epsilon, theta, truncate)
    positions = parse_positions(sensitive)
    rows = []
    for index, size in enumerate(parse_ints(omega)):
        policy = WindowPolicy(mode, size)
        if exact:
            leakage, stderr = window_leakage_exact(model, positions, policy), 0.0
        elif isinstance(model, HmmModel):
            leakage, stderr = window_leakage_mc(model, positions, policy, samples, stream(seed, index))
        else:
            raise InputError("sampled window leakage needs an HMM; use --exact")
        rows.append(
            {
                "experiment": "window",
                "omega": size,
                "erasure_rate": policy.erasure_rate(model.n, positions),
                "leakage": leakage,
                "stderr": stderr,
                "seed": seed,
            }
        )
    frame = pd.DataFrame(rows)
    if as_json:
        click.echo(frame.to_json(orient="records"))
    else:
        text = write_results(frame, out)
        if text is not None:
            click.echo(text, nl=False)


@cli.command()
@model_options
@click.option("--q-model", "q_model_path", type=click.Path(exists=True, dir_okay=False), help="Model the mechanism is built from.")
@click.option("--q-epsilon", type=float, default=None, help="Crossover probability assumed by the mechanism.")
@click.option("--q-theta", type=float, default=None, help="Error probability assumed by the mechanism.")
@click.option("--k", "sensitive", default="1", show_default=True)
@click.option("--order", default=None)
@click.option("--samples", type=int, default=10000, show_default=True, help="Sequences for D(p || q) when q is too large to enumerate.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def robustness(panel, model_path, epsilon, theta, truncate, q_model_path, q_epsilon, q_theta, sensitive, order, samples, seed, as_json):
    """Leakage when the mechanism's model q differs from the true model p, against D(p || q).

    Past the enumeration budget only a sampled D(p || q) is reported, with
    leakage null in the JSON output.
    """
    p_model = resolve_model(panel, model_path, epsilon, theta, truncate)
    if q_model_path is not None:
        q_model = resolve_model(None, q_model_path, epsilon, theta, truncate)
    elif isinstance(p_model, HmmModel):
        q_model = HmmModel(
            p_model.panel,
            epsilon if q_epsilon is None else q_epsilon,
            theta if q_theta is None else q_theta,
            p_model.alphabet,
        )
    else:
        raise InputError("--q-model is required unless p is an HMM")
    pair = MismatchPair(p_model, q_model)
    result = estimate_robustness(pair, parse_positions(sensitive), samples, stream(seed), _ordering(order))
    payload = {
        "leakage": result.leakage if result.exact else None,
        "kl_bound": result.kl_bound,
        "kl_stderr": result.kl_stderr,
        "q_self_leakage": result.q_self_leakage if result.exact else None,
    }
    _emit(payload, as_json, f"{result.leakage:.9f}\t{result.kl_bound:.9f}")


@cli.command()
@click.option("--instance", "instance_path", type=click.Path(exists=True, dir_okay=False), help="Instance JSON.")
@click.option("--m", "universe", type=int, default=4, show_default=True, help="Universe size of a random instance.")
@click.option("--sets", type=int, default=3, show_default=True, help="Number of sets of a random instance.")
@click.option("--seed", type=int, default=0, show_default=True)
def hardness(instance_path, universe, sets, seed):
    """Best erasure ordering against minimum hitting set, as JSON."""
    if instance_path is not None:
        instance = HittingSetInstance.load(instance_path)
    else:
        instance = random_instance(universe, sets, stream(seed))
    result = solve(instance)
    payload = {"instance": instance.to_dict(), **result.to_dict()}
    if len(instance.edges) <= MAX_PARITY_EDGES:
        payload["deterministic"] = bool(verify_deterministic_rule(instance, result.ordering))
    click.echo(json.dumps(payload))


@cli.command()
@click.argument("config_path", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--name", type=click.Choice(EXPERIMENT_NAMES), default=None, help="Experiment to run without a config file.")
@click.option("--panel", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--k", "sensitive", default=None)
@click.option("--epsilon", "epsilons", default=None, help="Comma-separated grid.")
@click.option("--theta", "thetas", default=None, help="Comma-separated grid.")
@click.option("--omega", "omegas", default=None, help="Comma-separated grid.")
@click.option("--runs", type=int, default=None)
@click.option("--samples", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV output (default stdout).")
@click.option("--json", "json_path", type=click.Path(dir_okay=False), default=None, help="Also write rows as JSON here.")
@click.option("--progress", is_flag=True)
def experiment(config_path, name, panel, sensitive, epsilons, thetas, omegas, runs, samples, seed, workers, out, json_path, progress):
    """Run a named sweep and write one CSV row per metric per grid point.

    Columns: experiment, point, metric, value, stderr, status, epsilon, theta,
    omega, n, m, sensitive, seed.
    """
    if config_path is not None:
        config_path = Path(config_path)
        try:
            data = json.loads(config_path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"cannot parse {config_path}: {exc}") from exc
        base_dir = config_path.parent
    elif name is not None:
        data, base_dir = {"name": name}, None
    else:
        raise InputError("give a config file or --name")
    overrides = {
        "name": name,
        "panel_path": str(Path(panel).resolve()) if panel else None,
        "runs": runs,
        "samples": samples,
        "seed": seed,
        "workers": workers,
        "sensitive": [k + 1 for k in parse_positions(sensitive)] if sensitive else None,
        "epsilons": parse_floats(epsilons) if epsilons else None,
        "thetas": parse_floats(thetas) if thetas else None,
        "omegas": list(parse_ints(omegas)) if omegas else None,
    }
    data.update({key: value for key, value in overrides.items() if value is not None})
    config = ExperimentConfig.from_dict(data, base_dir=base_dir)
    frame = ExperimentRunner(config).run(progress=progress)
    text = write_results(frame, out or config.output, json_path)
    if text is not None:
        click.echo(text, nl=False)


def main() -> None:
    cli()
