"""
Command line interface: ingest datasets, generate synthetic data, fit one
factorization, score a stored embedding, or run a Monte-Carlo benchmark.
"""

import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from .config import ALGORITHMS, GRAPH_ALGORITHMS, ExperimentConfig, get_thread_count, load_config_file, merge_settings
from .evaluation import evaluate_embedding
from .exceptions import ConfigError, GwntfError
from .experiment import FACTORS_DIR, REPORT_FILE, fit_algorithm, run_experiment
from .graph import build_knn
from .models import METRICS, MI_NORMALIZATION, ClusteringSummary
from .synthetic import make_synthetic
from .tensor_io import dump_factors, ingest as ingest_dataset, parse_shape, read_labels, read_wntf, write_labels, write_wntf

console = Console()

_EXPERIMENT_OPTIONS = (
    click.option('--dataset', help='Dataset file (WNTF binary or CSV)'),
    click.option('--format', 'fmt', type=click.Choice(['wntf', 'csv']), help='Dataset format'),
    click.option('--shape', help='Sample shape for CSV datasets, e.g. 32x32'),
    click.option('--labels', help='Ground-truth labels, one integer per line'),
    click.option('--algo', type=click.Choice(ALGORITHMS), help='Algorithm'),
    click.option('--rank', type=int, help='Number of components R'),
    click.option('--lambda', 'lam', type=float, help='Entropic sharpness'),
    click.option('--alpha', type=float, help='Source-marginal KL weight'),
    click.option('--beta', type=float, help='Target-marginal KL weight'),
    click.option('--mu', type=float, help='Graph regularization weight'),
    click.option('--p-neighbors', type=int, help='Neighbours per sample in the affinity graph'),
    click.option('--weighting', type=click.Choice(['binary', 'heat']), help='Graph edge weights'),
    click.option('--sigma', type=float, help='Heat kernel width'),
    click.option('--sinkhorn-iters', type=int, help='Inner scaling sweeps per outer iteration'),
    click.option('--wasserstein-modes', help="Modes with a transport loss, e.g. '0,1' (default all)"),
    click.option('--graph-rule', type=click.Choice(['mm', 'printed']), help='Sample factor update rule'),
    click.option('--clusters', type=int, help='k for k-means (default: number of distinct labels)'),
    click.option('--runs', type=int, help='Monte-Carlo runs'),
    click.option('--seed', type=int, help='First seed'),
    click.option('--tol', type=float, help='Relative objective change that stops a fit'),
    click.option('--max-iters', type=int, help='Maximum outer iterations'),
    click.option('--out', help='Output directory'),
    click.option('--dump-factors', is_flag=True, help='Write factor matrices as WNTF files'),
    click.option('--config', 'config_file', type=click.Path(exists=True, dir_okay=False), help='key=value config file'),
)


def experiment_options(command: Callable) -> Callable:
    for option in reversed(_EXPERIMENT_OPTIONS):
        command = option(command)
    return command


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=verbose)],
        force=True,
    )


def _build_config(params: Dict[str, Any]) -> ExperimentConfig:
    params = dict(params)
    config_file = params.pop('config_file', None)
    params['format'] = params.pop('fmt', None)
    params['lambda'] = params.pop('lam', None)
    # unset flags must not override the config file
    for flag in ('dump_factors', 'no_db'):
        if params.get(flag) is False:
            params[flag] = None
    base = load_config_file(config_file) if config_file else {}
    return ExperimentConfig.from_mapping(merge_settings(base, params)).validate()


def _print_summary(title: str, summary: ClusteringSummary) -> None:
    table = Table(title=title)
    table.add_column("Metric", style="cyan")
    table.add_column("Mean", style="green")
    table.add_column("Std", style="yellow")
    for metric in METRICS:
        table.add_row(metric.upper(), f"{summary.mean(metric):.4f}", f"{summary.std(metric):.4f}")
    console.print(table)
    console.print(f"MI normalization: {MI_NORMALIZATION} (raw MI {summary.mean('mi_raw'):.4f} nats)")


def _run(action: Callable[[], None], verbose: bool) -> None:
    """Run a command body, turning library and file errors into exit status 1."""
    try:
        action()
    except (GwntfError, OSError) as e:
        console.print(f"❌ Error: {e}")
        if verbose:
            console.print_exception()
        raise SystemExit(1)


@click.group()
def main():
    """
    Graph-regularized Wasserstein nonnegative tensor factorization.

    Clusters samples stacked on the last tensor mode.
    """


@main.command()
@click.option('--dataset', required=True, help='Dataset file')
@click.option('--format', 'fmt', type=click.Choice(['wntf', 'csv']), default='wntf', help='Dataset format')
@click.option('--shape', help='Sample shape for CSV datasets, e.g. 32x32')
@click.option('--labels', help='Labels file, one integer per sample')
@click.option('--out', required=True, help='Destination WNTF file')
@click.option('--verbose', '-v', is_flag=True, help='Debug logging')
def ingest(dataset, fmt, shape, labels, out, verbose):
    """Convert a dataset to the WNTF binary format (values scaled to [0, 1])."""
    _configure_logging(verbose)

    def action():
        console.print(f"📥 Loading dataset: {dataset}")
        tensor, label_values = ingest_dataset(dataset, fmt, parse_shape(shape) if shape else None, labels)
        write_wntf(tensor, out)
        console.print(f"✅ Wrote tensor of shape {tensor.shape} to {out}")
        if label_values is not None:
            write_labels(label_values, f"{out}.labels")
            console.print(f"✅ {label_values.size} labels, {len(set(label_values.tolist()))} classes")

    _run(action, verbose)


@main.command()
@click.option('--clusters', '-k', default=3, help='Number of clusters')
@click.option('--per-cluster', '-m', default=10, help='Samples per cluster')
@click.option('--shape', default='10x10', help='Sample shape, e.g. 10x10')
@click.option('--noise', default=0.05, help='Gaussian noise standard deviation')
@click.option('--seed', default=0, help='Generator seed')
@click.option('--out', required=True, help='Destination WNTF file (labels go to OUT.labels)')
@click.option('--verbose', '-v', is_flag=True, help='Debug logging')
def synth(clusters, per_cluster, shape, noise, seed, out, verbose):
    """Generate a clustered synthetic tensor."""
    _configure_logging(verbose)

    def action():
        tensor, labels = make_synthetic(clusters, per_cluster, parse_shape(shape), noise, seed)
        write_wntf(tensor, out)
        write_labels(labels, f"{out}.labels")
        console.print(f"✅ Wrote synthetic tensor {tensor.shape} to {out} ({clusters} clusters)")

    _run(action, verbose)


@main.command()
@experiment_options
@click.option('--verbose', '-v', is_flag=True, help='Debug logging')
def fit(verbose, **params):
    """Run one factorization and write report.json."""
    _configure_logging(verbose)

    def action():
        config = _build_config(params)
        if config.algo == "kmeans":
            raise ConfigError("kmeans has no factorization; use 'bench'")
        if config.dataset is None:
            raise ConfigError("No dataset given")
        tensor, _ = ingest_dataset(config.dataset, config.format, parse_shape(config.shape) if config.shape else None)
        graph = None
        if config.algo in GRAPH_ALGORITHMS:
            graph = build_knn(tensor, config.p_neighbors, config.weighting, config.sigma)
        console.print(f"🎯 Fitting {config.algo.upper()} (rank {config.rank}) on {tensor.shape}")
        report = fit_algorithm(config, tensor, graph, config.seed, get_thread_count())

        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / REPORT_FILE, "w") as f:
            json.dump({"config": config.to_dict(), "config_hash": config.config_hash(), "fit": report.to_dict()}, f, indent=2)
        if config.dump_factors:
            dump_factors(report.factors, out / FACTORS_DIR, f"{config.algo}_seed{config.seed}")

        console.print(Panel(
            f"[bold green]Iterations:[/bold green] {report.iterations_run}\n"
            f"[bold blue]Converged:[/bold blue] {report.converged}\n"
            f"[bold yellow]Final objective:[/bold yellow] {report.final_objective:.6g}",
            title=f"{config.algo.upper()} fit",
            border_style="green" if report.converged else "yellow",
        ))
        console.print(f"💾 Report saved to {out / REPORT_FILE}")

    _run(action, verbose)


@main.command(name="eval")
@click.option('--dataset', required=True, help='Sample factor stored as a 2-way WNTF file (samples x R)')
@click.option('--labels', required=True, help='Labels file')
@click.option('--clusters', type=int, help='k for k-means (default: number of distinct labels)')
@click.option('--runs', default=10, help='Number of k-means seeds')
@click.option('--seed', default=0, help='First seed')
@click.option('--verbose', '-v', is_flag=True, help='Debug logging')
def evaluate(dataset, labels, clusters, runs, seed, verbose):
    """Cluster the rows of a stored sample factor and print the scores."""
    _configure_logging(verbose)

    def action():
        embedding = read_wntf(dataset).data
        truth = read_labels(labels)
        k = clusters or len(set(truth.tolist()))
        summary = evaluate_embedding(embedding, truth, k, range(seed, seed + runs))
        _print_summary(f"Clustering of {Path(dataset).name} (k={k})", summary)

    _run(action, verbose)


@main.command()
@experiment_options
@click.option('--no-db', is_flag=True, help='Skip database saving')
@click.option('--verbose', '-v', is_flag=True, help='Debug logging')
def bench(verbose, **params):
    """Run a Monte-Carlo benchmark and write results.csv and report.json."""
    _configure_logging(verbose)

    def action():
        config = _build_config(params)
        outcome = run_experiment(config)
        _print_summary(f"{config.algo.upper()} on {outcome.row.dataset}", outcome.summary)
        if config.no_db:
            console.print("⚠️  Database saving skipped (--no-db flag)")

    _run(action, verbose)


if __name__ == '__main__':
    main()
