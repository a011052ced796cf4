"""``svcrank`` command line: rank, simulate, eval, gen.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant violation.
"""

from __future__ import annotations

import json
import sys
import traceback
from pathlib import Path

import click

from . import __version__
from .dataio import (
    Dataset,
    format_number,
    generate_synthetic,
    load_observations,
    save_observations,
    save_ranking,
    save_trace,
)
from .errors import DataError, InvalidParameterError, InvariantViolation, ParseError, SvcRankError
from .evaluation import evaluate
from .ranking import RankingContext, predict
from .sim import SimConfig, observations_from_trace, run

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class _ExitCodeGroup(click.Group):
    """Maps exceptions onto the exit-code contract instead of click's defaults."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            code = rv if isinstance(rv, int) else EXIT_OK
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_USAGE
        except click.ClickException as exc:
            exc.show()
            code = EXIT_USAGE
        except InvalidParameterError as exc:
            click.echo(f"error: {exc}", err=True)
            code = EXIT_USAGE
        except InvariantViolation as exc:
            click.echo(f"internal error: {exc}", err=True)
            code = EXIT_INTERNAL
        except (SvcRankError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            code = EXIT_DATA
        except Exception:
            traceback.print_exc()
            code = EXIT_INTERNAL
        if standalone_mode:
            sys.exit(code)
        return code


existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)
output_file = click.Path(dir_okay=False, path_type=Path)


@click.group(cls=_ExitCodeGroup)
@click.version_option(__version__, prog_name="svcrank")
def cli():
    """Predict cloud service rankings and simulate checkpointed load balancing."""


@cli.command("rank")
@click.option("--input", "input_path", required=True, type=existing_file, help="Observation CSV.")
@click.option("--consumer", required=True, help="Consumer to predict a ranking for.")
@click.option("--implicit", default="", help="Comma-separated services the consumer already used.")
@click.option("--output", required=True, type=output_file, help="Ranking JSON to write.")
def rank_cmd(input_path, consumer, implicit, output):
    """Predict the service ranking for one consumer."""
    dataset = load_observations(input_path)
    try:
        active = dataset.consumer(consumer)
    except KeyError:
        raise DataError(f"consumer {consumer!r} does not appear in {input_path}") from None
    ctx = RankingContext(
        active,
        tuple(o for o in dataset.consumers if o.consumer != consumer),
        frozenset(s.strip() for s in implicit.split(",") if s.strip()),
    )
    prediction = predict(ctx, dataset.services)
    save_ranking(prediction.ranking, prediction.priorities, output)
    for service in prediction.ranking:
        value = prediction.priorities[service]
        click.echo(f"{service}\t{'-' if value is None else format_number(value)}")


@cli.command("simulate")
@click.option("--config", "config_path", required=True, type=existing_file, help="Simulation config JSON.")
@click.option("--trace", "trace_path", required=True, type=output_file, help="Trace JSON to write.")
@click.option("--observations", "obs_path", required=True, type=output_file, help="Observation CSV to write.")
def simulate_cmd(config_path, trace_path, obs_path):
    """Run the checkpointing simulator and export response-time observations."""
    try:
        raw = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{config_path}: {exc.msg}", line=exc.lineno) from None
    if not isinstance(raw, dict):
        raise ParseError(f"{config_path}: expected a JSON object")
    config = SimConfig.from_dict(raw)
    trace = run(config)
    observed = observations_from_trace(trace)
    services = sorted({s for obs in observed for s in obs.samples})
    save_trace(trace, trace_path)
    save_observations(Dataset(tuple(services), tuple(observed)), obs_path)
    kinds = [e.kind for e in trace.events]
    click.echo(
        f"completed {kinds.count('complete')} jobs, "
        f"{kinds.count('checkpoint')} checkpoints, "
        f"{kinds.count('rollback')} rollbacks, "
        f"{kinds.count('migration')} migrations"
    )


@cli.command("eval")
@click.option("--input", "input_path", required=True, type=existing_file, help="Observation CSV.")
@click.option("--holdout", default=0.0, show_default=True, type=click.FloatRange(0.0, 1.0, max_open=True),
              help="Fraction of each consumer's own samples hidden from the predictor.")
@click.option("--seed", default=0, show_default=True, type=click.IntRange(0, 2**64 - 1),
              help="Seed for choosing the hidden samples.")
def eval_cmd(input_path, holdout, seed):
    """Score predictions against ground truth using the correspondence value."""
    report = evaluate(load_observations(input_path), holdout, seed)
    for consumer, value in report.per_consumer.items():
        click.echo(f"{consumer}\t{value.cv:.6f}")
    click.echo(f"mean_cv\t{report.mean_cv:.6f}\t(vs {report.reference})")


@cli.command("gen")
@click.option("--seed", default=0, show_default=True, type=click.IntRange(0, 2**64 - 1))
@click.option("--services", required=True, type=click.IntRange(min=2), help="Number of services.")
@click.option("--consumers", required=True, type=click.IntRange(min=1), help="Number of consumers.")
@click.option("--noise", required=True, type=click.FloatRange(0.0, 1.0),
              help="Probability that two neighbouring services appear swapped.")
@click.option("--observe", default=0.8, show_default=True, type=click.FloatRange(0.0, 1.0, min_open=True),
              help="Probability that a consumer observed a given service.")
@click.option("--output", required=True, type=output_file, help="Observation CSV to write.")
def gen_cmd(seed, services, consumers, noise, observe, output):
    """Generate a synthetic dataset with a known ground-truth ranking."""
    dataset = generate_synthetic(seed, services, consumers, noise, observe)
    save_observations(dataset, output)
    n_samples = sum(len(o) for o in dataset.consumers)
    click.echo(f"wrote {n_samples} observations for {consumers} consumers to {output}")


def main():
    cli(prog_name="svcrank")
