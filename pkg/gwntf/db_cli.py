"""
Management commands for the benchmark results store.

Run as `python -m gwntf.db_cli`. The store location comes from DATABASE_URL.
"""

from contextlib import contextmanager
from typing import Iterator

import click
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .database import drop_tables
from .db_init import check_database_connection, check_tables_exist, get_database_info, initialize_database, row_counts
from .db_service import DatabaseService
from .models import METRICS


def _confirm_loss(console: Console, yes: bool, action: str) -> bool:
    """Ask before an action that deletes stored runs; --yes skips the prompt."""
    if yes:
        return True
    try:
        stored = row_counts().get('experiment_runs', 0)
    except Exception:
        stored = 0
    if stored:
        console.print(f"⚠️  {stored} stored experiment runs will be lost.")
    return click.confirm(f"{action}?", default=False)


@click.group()
def db():
    """Results store management commands."""
    pass


@db.command()
@click.option('--force', is_flag=True, help='Drop and recreate the result tables')
@click.option('--yes', '-y', is_flag=True, help='Do not ask before dropping tables')
def init(force, yes):
    """Create the result tables."""
    console = Console()

    if force and not _confirm_loss(console, yes, "Recreate the result tables"):
        console.print("Aborted.")
        return

    try:
        if initialize_database(force_recreate=force):
            console.print("✅ Database initialization completed successfully!")
        else:
            console.print("❌ Database initialization failed!")
            raise SystemExit(1)
    except SystemExit:
        raise
    except Exception as e:
        console.print(f"❌ Error initializing database: {e}")
        raise SystemExit(1)


@db.command()
def status():
    """Show connection, tables, stored row counts and schema gaps."""
    console = Console()

    try:
        info = get_database_info()
        counts = info.get('row_counts') or {}
        tables = ", ".join(info['existing_tables']) or "none"

        console.print(Panel(
            f"[bold green]Database URL:[/bold green] {info['database_url']}\n"
            f"[bold blue]Connection:[/bold blue] {info['connection_status']}\n"
            f"[bold yellow]Schema complete:[/bold yellow] {info['tables_exist']}\n"
            f"[bold magenta]Tables:[/bold magenta] {tables}",
            title="Results Store",
            border_style="green" if info['tables_exist'] else "red"
        ))

        if counts:
            console.print("📊 Stored rows: " + ", ".join(f"{table} {count}" for table, count in counts.items()))
        for table, columns in (info.get('missing_columns') or {}).items():
            console.print(f"[yellow]⚠️  {table} lacks columns: {', '.join(columns)}[/yellow]")
        if 'error' in info:
            console.print(f"[red]Error: {info['error']}[/red]")

    except Exception as e:
        console.print(f"❌ Error checking database status: {e}")


@db.command()
def check():
    """Exit 0 if the store is reachable and its schema complete, 1 otherwise."""
    console = Console()

    ready = check_database_connection() and check_tables_exist()
    console.print("✅ Database is ready" if ready else "❌ Database is not ready")
    if not ready:
        raise SystemExit(1)


@db.command()
@click.option('--yes', '-y', is_flag=True, help='Do not ask for confirmation')
def drop(yes):
    """Drop the result tables and every stored run."""
    console = Console()

    if not _confirm_loss(console, yes, "Drop the result tables"):
        console.print("Aborted.")
        return

    try:
        drop_tables()
        console.print("✅ Database tables dropped successfully!")
    except Exception as e:
        console.print(f"❌ Error dropping tables: {e}")
        raise SystemExit(1)


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.4f}"


@contextmanager
def _results_store(console: Console, action: str) -> Iterator[DatabaseService]:
    """Open a DatabaseService, report any failure as `❌ Error <action>` and always close it."""
    service = None
    try:
        service = DatabaseService()
        yield service
    except Exception as e:
        console.print(f"❌ Error {action}: {e}")
    finally:
        if service is not None:
            service.close()


@db.command()
@click.option('--limit', '-l', default=10, help='Number of runs to show')
def list_runs(limit):
    """List recent experiment runs, newest first."""
    console = Console()

    with _results_store(console, "listing runs") as service:
        runs = service.get_experiment_runs(limit=limit)
        if not runs:
            console.print("📭 No experiment runs found.")
            return

        table = Table(title="Recent Experiment Runs")
        for header, style, width in (
            ("ID", "cyan", 8), ("Created", "magenta", 16), ("Algorithm", "green", 9),
            ("Dataset", "blue", 24), ("Seeds ok", "yellow", 8), ("ACC", "green", 8),
            ("NMI", "green", 8), ("Config", "cyan", 10),
        ):
            table.add_column(header, style=style, width=width)

        for run in runs:
            dataset = run['dataset'] or "?"
            table.add_row(
                run['id'][:8],
                run['created_at'].strftime("%Y-%m-%d %H:%M"),
                run['algorithm'],
                dataset if len(dataset) <= 24 else "..." + dataset[-21:],
                f"{run['runs'] - run['failures']}/{run['runs']}",
                _fmt(run['acc_mean']),
                _fmt(run['nmi_mean']),
                run['config_hash'][:10],
            )
        console.print(table)


@db.command()
@click.argument('run_id')
def show_run(run_id):
    """Show one experiment run with its per-seed scores."""
    console = Console()

    with _results_store(console, "showing run") as service:
        run = service.get_experiment_run(run_id)
        if not run:
            console.print(f"❌ Experiment run {run_id} not found.")
            return

        console.print(Panel(
            f"[bold green]Algorithm:[/bold green] {run['algorithm']}\n"
            f"[bold blue]Dataset:[/bold blue] {run['dataset']}\n"
            f"[bold yellow]Seeds:[/bold yellow] {run['runs']} ({run['failures']} failed)\n"
            f"[bold magenta]Created:[/bold magenta] {run['created_at']}\n"
            f"[bold cyan]Config hash:[/bold cyan] {run['config_hash']}",
            title=f"Experiment Run {run_id[:8]}",
            border_style="green" if not run['failures'] else "yellow",
        ))

        if not run['seed_results']:
            return
        table = Table(title="Seed Results")
        table.add_column("Seed", style="cyan", width=6)
        for metric in METRICS:
            table.add_column(metric.upper(), style="green", width=8)
        table.add_column("Iterations", style="yellow", width=10)
        table.add_column("Status", style="red", width=30)
        for seed in run['seed_results']:
            table.add_row(
                str(seed['seed']),
                *[_fmt(seed[metric]) for metric in METRICS],
                "-" if seed['iterations'] is None else str(seed['iterations']),
                f"failed: {seed['error']}" if seed['failed'] else "ok",
            )
        console.print(table)


@db.command()
@click.argument('config_hash')
def stats(config_hash):
    """Pool every successful seed across all runs of one configuration."""
    console = Console()

    with _results_store(console, "showing stats") as service:
        pooled = service.get_config_stats(config_hash)
        if not pooled:
            console.print(f"❌ No runs found for configuration {config_hash}.")
            return

        console.print(Panel(
            f"[bold green]Algorithm:[/bold green] {pooled['algorithm']}\n"
            f"[bold blue]Dataset:[/bold blue] {pooled['dataset']}\n"
            f"[bold yellow]Experiment runs:[/bold yellow] {pooled['experiment_runs']}\n"
            f"[bold magenta]Seeds:[/bold magenta] {pooled['seed_runs']} ({pooled['failures']} failed)",
            title=f"Configuration {config_hash[:10]}",
            border_style="blue",
        ))

        table = Table(title="Metrics over all seeds")
        table.add_column("Metric", style="cyan")
        table.add_column("Mean", style="green")
        table.add_column("Std", style="yellow")
        for metric in METRICS:
            table.add_row(metric.upper(), _fmt(pooled[metric]['mean']), _fmt(pooled[metric]['std']))
        console.print(table)


if __name__ == '__main__':
    db()
