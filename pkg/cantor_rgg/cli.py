"""Command line interface `cantor-rgg`"""

import functools
import json
import logging
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Sequence, Union

import click
from pydantic import ValidationError

from cantor_rgg import __version__
from cantor_rgg.exceptions import CantorError, ConfigError, DomainError, ParameterDomainError
from cantor_rgg.experiments import resolve_workers, run_experiment
from cantor_rgg.model import ExperimentConfig, RunManifest, parse_rational
from cantor_rgg.output import config_document, config_hash, emit_config, results_csv, sequence_csv
from cantor_rgg.params import make_params
from cantor_rgg.sampler import format_points, read_points, sample_batch
from cantor_rgg.sequence import compute_sequence, compute_sequence_numeric
from cantor_rgg.specfun import rate_constant
from cantor_rgg.threshold import connectivity_threshold
from cantor_rgg.verification import run_checks

logger = logging.getLogger(__name__)

CONFIG_FIELDS = ("phi", "depth", "n_grid", "replicates", "master_seed", "targets", "deltas")


def report_errors(f):
    """Decorator turning a CantorError into a message on stderr and exit status 1"""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except CantorError as e:
            logger.debug("%s failed", f.__name__, exc_info=True)
            click.echo(f"Error: {e.reason}", err=True)
            raise click.exceptions.Exit(1) from e

    return wrapper


def config_from_document(document: dict) -> ExperimentConfig:
    """Validates a flat config document, see `parse_config`

    Raises:
        ConfigError: Naming the first offending field
    """
    if not isinstance(document, dict):
        raise ConfigError("the config must be a JSON object")
    unknown = sorted(set(document) - set(CONFIG_FIELDS))
    if unknown:
        raise ConfigError("unknown field", field=unknown[0])
    if "phi" not in document:
        raise ConfigError("field required", field="phi")

    try:
        phi = parse_rational(document["phi"])
    except DomainError as e:
        raise ConfigError(e.reason, field="phi") from e
    depth = document.get("depth")
    if depth is not None and (isinstance(depth, bool) or not isinstance(depth, int)):
        raise ConfigError(f"must be an integer, got {depth!r}", field="depth")
    try:
        params = make_params(phi, depth)
    except ParameterDomainError as e:
        raise ConfigError(e.reason, field="phi") from e
    except DomainError as e:
        raise ConfigError(e.reason, field="depth") from e

    fields = {key: value for key, value in document.items() if key not in ("phi", "depth")}
    try:
        return ExperimentConfig(params=params, **fields)
    except ValidationError as e:
        error = e.errors()[0]
        field = ".".join(str(part) for part in error["loc"]) or None
        raise ConfigError(error["msg"], field=field) from e


def parse_config(path: Union[str, Path]) -> ExperimentConfig:
    """Reads an experiment config from a JSON file

    The file holds one flat object {"phi": "p/q", "depth"?, "n_grid"?, "replicates"?, "master_seed"?,
    "targets"?, "deltas"?}. Omitted fields take the defaults of ExperimentConfig and make_params.

    Args:
        path (Union[str, Path]): Config file

    Returns:
        ExperimentConfig: The validated config

    Raises:
        ConfigError: If the file can not be read, is not JSON or fails validation
    """
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"can not read {path}: {e.strerror}") from e
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e.msg} at line {e.lineno}") from e
    return config_from_document(document)


def write_run(config: ExperimentConfig, out: Path, workers: int) -> Path:
    """Runs every target of the config and writes results.csv and manifest.json into out/run-<hash12>

    Returns:
        Path: The run directory
    """
    digest = config_hash(config)
    started_at = datetime.now(timezone.utc)
    started = time.perf_counter()
    result = run_experiment(config, workers)
    run_dir = out / f"run-{digest[:12]}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "results.csv").write_text(results_csv(result))
    for flag in result.flags:
        logger.warning(flag)
    manifest = RunManifest(
        config_hash=digest,
        master_seed=config.master_seed,
        started_at=started_at,
        finished_at=datetime.now(timezone.utc),
        version=__version__,
        outputs=["results.csv"],
        workers=resolve_workers(workers),
        wall_time=time.perf_counter() - started,
        config=config_document(config),
    )
    (run_dir / "manifest.json").write_text(manifest.model_dump_json(indent=2) + "\n")
    logger.info("Wrote %s", run_dir)
    return run_dir


@click.group()
@click.version_option(__version__, prog_name="cantor-rgg")
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for debug output")
def cli(verbose: int):
    """Connectivity of random geometric graphs on Cantor(phi) samples"""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)


@cli.command()
@click.option("--phi", required=True, help='Parameter as "p/q"')
@click.option("--n", "n", type=int, required=True, help="Number of points")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--replicate", type=int, default=0, show_default=True)
@click.option("--depth", type=int, default=None, help="Truncation depth, 53 bit accurate by default")
@click.option("--format", "style", type=click.Choice(["decimal", "hex"]), default="decimal", show_default=True)
@click.option("--out", type=click.File("w"), default="-", help="Points file, stdout by default")
@report_errors
def sample(phi: str, n: int, seed: int, replicate: int, depth: int, style: str, out):
    """Draws n Cantor(phi) points, one per line"""
    batch = sample_batch(make_params(phi, depth), n, seed, replicate)
    out.write(format_points(batch.points, style))


@cli.command()
@click.option("--points-file", type=click.Path(dir_okay=False), required=True)
@report_errors
def threshold(points_file: str):
    """Prints the connectivity threshold, then the endpoints of the widest gap"""
    try:
        points = read_points(points_file)
    except OSError as e:
        raise DomainError(f"can not read {points_file}: {e.strerror}") from e
    result = connectivity_threshold(points)
    click.echo(repr(result.r))
    click.echo(f"{result.gap_left!r} {result.gap_right!r}")


@cli.command()
@click.option("--phi", required=True, help='Parameter as "p/q"')
@click.option("--n-max", type=int, required=True)
@click.option("--numeric", is_flag=True, help="float64 recursion instead of exact rationals")
@report_errors
def sequence(phi: str, n_max: int, numeric: bool):
    """Writes the expected minima a_1..a_n_max as CSV"""
    seq = compute_sequence_numeric(phi, n_max) if numeric else compute_sequence(phi, n_max)
    click.echo(sequence_csv(seq), nl=False)


@cli.command()
@click.option("--phi", required=True, help='Parameter as "p/q"')
@report_errors
def constant(phi: str):
    """Prints C(phi), d_phi and the factors of C(phi) as JSON"""
    params = make_params(phi)
    document = {**rate_constant(params).model_dump(), "dim": params.dim}
    click.echo(json.dumps(document, indent=2))


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON experiment config")
@click.option("--phi", help='Overrides the phi of the config, "p/q"')
@click.option("--seed", type=int, help="Overrides the master seed of the config")
@click.option("--out", type=click.Path(file_okay=False), envvar="CANTOR_RGG_OUT", default="./results",
              show_default=True, show_envvar=True)
@click.option("--threads", type=int, default=1, show_default=True, help="Worker processes, 0 for one per CPU")
@report_errors
def experiment(config_path: str, phi: str, seed: int, out: str, threads: int):
    """Runs the Monte Carlo targets of a config"""
    if config_path is None and phi is None:
        raise ConfigError("either --config or --phi is required")
    document = {}
    if config_path is not None:
        document = json.loads(emit_config(parse_config(config_path)))
    if phi is not None:
        document["phi"] = phi
        document.pop("depth", None)
    if seed is not None:
        document["master_seed"] = seed
    config = config_from_document(document)
    run_dir = write_run(config, Path(out), threads)
    click.echo(str(run_dir))


@cli.command()
@click.option("--phi", default="1/3", show_default=True, help='Parameter as "p/q"')
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True, help="Worker processes, 0 for one per CPU")
@click.option("--full", is_flag=True, help="Acceptance scale replicate counts")
@report_errors
def verify(phi: str, seed: int, threads: int, full: bool):
    """Runs the acceptance checks, exit status 1 if any fails"""
    outcomes = run_checks(phi=phi, seed=seed, workers=threads, full=full)
    for outcome in outcomes:
        click.echo(f"{'PASS' if outcome.passed else 'FAIL'} {outcome.name}: {outcome.detail}")
    if not all(outcome.passed for outcome in outcomes):
        raise click.exceptions.Exit(1)


def dispatch(subcommand: str, args: Sequence[str] = ()) -> int:
    """Runs one subcommand and returns its exit status

    Unknown subcommands print the usage text and return 2.
    """
    argv: List[str] = [subcommand, *args]
    try:
        status = cli.main(args=argv, prog_name="cantor-rgg", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    return status if isinstance(status, int) else 0


def main():
    cli(prog_name="cantor-rgg")
