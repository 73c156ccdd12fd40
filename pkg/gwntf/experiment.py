"""
Monte-Carlo benchmark runner: dispatches an algorithm over a range of seeds,
clusters the resulting sample factor and writes the result table, the JSON
report, optional factor dumps and the database record.
"""

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .baselines import gncp_fit, gnmf_fit, ncp_fit, nmf_fit
from .config import GRAPH_ALGORITHMS, ExperimentConfig, get_thread_count
from .db_service import DatabaseService
from .evaluation import kmeans, score_clustering
from .exceptions import ConfigError, ExperimentFailed, GwntfError
from .factorize import GwntfConfig, gwntf_fit
from .graph import AffinityGraph, build_knn
from .models import ClusteringSummary, FitReport, MI_NORMALIZATION, ResultRow, SeedOutcome
from .tensor import DataTensor, matricize
from .tensor_io import dump_factors, ingest, parse_shape
from .transport import TransportHyperParams

logger = logging.getLogger(__name__)

RESULTS_FILE = "results.csv"
REPORT_FILE = "report.json"
FACTORS_DIR = "factors"


def gwntf_config(config: ExperimentConfig, graph: Optional[AffinityGraph], seed: int, threads: int = 1) -> GwntfConfig:
    """Translate flag-level settings into the factorization's configuration."""
    return GwntfConfig(
        rank=config.rank,
        transport=TransportHyperParams(
            lam=config.lam,
            alpha=config.alpha,
            beta=config.beta,
            sinkhorn_iters=config.sinkhorn_iters,
        ),
        mu=config.mu if graph is not None else 0.0,
        graph=graph,
        max_outer_iters=config.max_iters,
        tol=config.tol,
        seed=seed,
        wasserstein_modes=config.wasserstein_modes,
        graph_rule=config.graph_rule,
        threads=threads,
    )


def fit_algorithm(
    config: ExperimentConfig,
    tensor: DataTensor,
    graph: Optional[AffinityGraph],
    seed: int,
    threads: int = 1,
) -> FitReport:
    """
    Run one factorization and return its report.

    Args:
        config: Experiment configuration (algorithm and hyperparameters)
        tensor: Data, samples on the last mode
        graph: Sample graph for the graph-regularized algorithms
        seed: Initialization seed
        threads: Workers for the per-mode transport refreshes

    Returns:
        FitReport whose last factor is the sample embedding
    """
    algo = config.algo
    if algo == "gwntf":
        return gwntf_fit(tensor, gwntf_config(config, graph, seed, threads))
    if algo == "ncp":
        return ncp_fit(tensor, config.rank, config.max_iters, seed, config.tol)
    if algo == "gncp":
        return gncp_fit(tensor, config.rank, graph, config.mu, config.max_iters, seed, config.tol, config.graph_rule)
    if algo == "nmf":
        return nmf_fit(tensor, config.rank, config.max_iters, seed, config.tol)
    if algo == "gnmf":
        return gnmf_fit(tensor, config.rank, graph, config.mu, config.max_iters, seed, config.tol, config.graph_rule)
    raise ConfigError(f"Algorithm {algo!r} has no factorization step")


@dataclass(eq=False)
class ExperimentOutcome:
    """Everything a benchmark produced."""

    row: ResultRow
    outcomes: List[SeedOutcome]
    config: ExperimentConfig

    @property
    def summary(self) -> ClusteringSummary:
        return self.row.summary

    def report(self) -> Dict[str, Any]:
        fits = [
            dict(seed=o.seed, **o.fit.to_dict()) for o in self.outcomes if o.fit is not None
        ]
        wtd_by_mode = {}
        for o in self.outcomes:
            if o.fit is not None and o.fit.algorithm == "gwntf" and o.fit.objective_trace:
                wtd_by_mode[str(o.seed)] = {
                    str(mode): value for mode, value in sorted(o.fit.objective_trace[-1].by_mode.items())
                }
        return {
            "config": self.config.to_dict(),
            "config_hash": self.row.config_hash,
            "mi_normalization": MI_NORMALIZATION,
            "result": self.row.to_dict(),
            "failures": [{"seed": o.seed, "error": o.error} for o in self.outcomes if o.failed],
            "fits": fits,
            "wtd_by_mode": wtd_by_mode,
        }


class ExperimentRunner:
    """
    Runs one configuration over `runs` consecutive seeds starting at `seed`.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        tensor: DataTensor,
        labels: np.ndarray,
        dataset_name: str = "",
    ):
        """
        Initialize the runner with data already in memory.

        Args:
            config: Validated experiment configuration
            tensor: Data scaled to [0, 1], samples on the last mode
            labels: Ground-truth label per sample
            dataset_name: Name recorded in the result row
        """
        self.config = config.validate()
        self.tensor = tensor
        self.labels = np.asarray(labels).ravel()
        if self.labels.size != tensor.shape[-1]:
            raise ConfigError(f"{self.labels.size} labels for {tensor.shape[-1]} samples")
        self.dataset_name = dataset_name or (config.dataset or "in-memory")
        self.clusters = config.clusters or int(np.unique(self.labels).size)
        self.outcome: Optional[ExperimentOutcome] = None
        self._graph: Optional[AffinityGraph] = None

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "ExperimentRunner":
        """
        Create a runner by ingesting the configured dataset.

        Args:
            config: Experiment configuration with dataset and labels paths

        Returns:
            ExperimentRunner instance
        """
        config.validate()
        if config.dataset is None:
            raise ConfigError("No dataset given")
        if config.labels is None:
            raise ConfigError("Clustering benchmarks need a labels file")
        shape = parse_shape(config.shape) if config.shape else None
        tensor, labels = ingest(config.dataset, config.format, shape, config.labels)
        return cls(config, tensor, labels, dataset_name=Path(config.dataset).name)

    @property
    def graph(self) -> Optional[AffinityGraph]:
        """Sample graph, built once on the data for the graph-regularized algorithms."""
        if self.config.algo not in GRAPH_ALGORITHMS:
            return None
        if self._graph is None:
            self._graph = build_knn(self.tensor, self.config.p_neighbors, self.config.weighting, self.config.sigma)
        return self._graph

    def _embedding(self, seed: int, threads: int) -> Tuple[np.ndarray, Optional[FitReport]]:
        if self.config.algo == "kmeans":
            return matricize(self.tensor, self.tensor.order - 1), None
        report = fit_algorithm(self.config, self.tensor, self.graph, seed, threads)
        return report.factors.sample_factor, report

    def run_seed(self, seed: int, threads: int = 1) -> SeedOutcome:
        """Fit and cluster for one seed; library errors are recorded, not raised."""
        try:
            embedding, report = self._embedding(seed, threads)
            predicted = kmeans(embedding, self.clusters, seed=seed)
            return SeedOutcome(seed=seed, clustering=score_clustering(predicted, self.labels, seed), fit=report)
        except (GwntfError, FloatingPointError) as e:
            logger.warning("Seed %d failed: %s", seed, e)
            return SeedOutcome(seed=seed, error=str(e))

    def run(self) -> ExperimentOutcome:
        """
        Run every seed and aggregate the scores.

        Returns:
            ExperimentOutcome with the result row and per-seed outcomes
        """
        config = self.config
        seeds = [config.seed + i for i in range(config.runs)]
        threads = get_thread_count()
        if self.graph is not None:
            logger.info("Sample graph: %d-NN, %s weights", self.graph.p, self.graph.weighting)
        started = time.perf_counter()

        print(f"\n🎯 Running {config.algo.upper()} on {self.dataset_name} over {len(seeds)} seeds")
        if threads > 1 and len(seeds) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outcomes = list(pool.map(self.run_seed, seeds))
        else:
            outcomes = [self.run_seed(seed, threads) for seed in seeds]
        outcomes.sort(key=lambda o: o.seed)

        failures = sum(o.failed for o in outcomes)
        if 2 * (len(outcomes) - failures) < len(outcomes):
            raise ExperimentFailed(f"{failures} of {len(outcomes)} seeds failed for {config.algo}")
        if failures:
            print(f"⚠️  {failures} of {len(outcomes)} seeds failed")

        summary = ClusteringSummary([o.clustering for o in outcomes if not o.failed])
        row = ResultRow(
            algorithm=config.algo,
            dataset=self.dataset_name,
            summary=summary,
            runs=len(outcomes),
            failures=failures,
            config_hash=config.config_hash(),
            wall_clock_s=time.perf_counter() - started,
        )
        self.outcome = ExperimentOutcome(row=row, outcomes=outcomes, config=config)
        print(f"✅ ACC {summary.mean('acc'):.4f} ± {summary.std('acc'):.4f}, NMI {summary.mean('nmi'):.4f}")
        return self.outcome

    def save_results(self, out_dir: Optional[str] = None) -> Dict[str, Path]:
        """
        Append the result row to results.csv and write report.json (plus factors on request).

        Args:
            out_dir: Output directory (defaults to the configured one)

        Returns:
            Mapping of artifact name to path
        """
        if self.outcome is None:
            raise ExperimentFailed("Nothing to save: run() has not completed")
        out = Path(out_dir or self.config.out)
        out.mkdir(parents=True, exist_ok=True)

        results_path = out / RESULTS_FILE
        write_header = not results_path.exists()
        with open(results_path, "a", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            if write_header:
                writer.writerow(ResultRow.CSV_HEADER)
            writer.writerow(self.outcome.row.to_csv_row())

        report_path = out / REPORT_FILE
        with open(report_path, "w") as f:
            json.dump(self.outcome.report(), f, indent=2)

        paths = {"results": results_path, "report": report_path}
        if self.config.dump_factors:
            fitted = [o for o in self.outcome.outcomes if o.fit is not None]
            if fitted:
                paths["factors"] = out / FACTORS_DIR
                dump_factors(fitted[0].fit.factors, out / FACTORS_DIR, f"{self.config.algo}_seed{fitted[0].seed}")

        print(f"\n💾 Results saved to {out}")
        return paths

    def _save_to_database(self) -> Optional[str]:
        """Save the outcome to the database; failures only warn."""
        if self.outcome is None:
            return None
        try:
            db_service = DatabaseService()
            run_id = db_service.save_experiment_run(
                row=self.outcome.row,
                outcomes=self.outcome.outcomes,
                config=self.config.to_dict(),
            )
            print(f"\n💾 Results saved to database (Run ID: {run_id})")
            return run_id
        except Exception as e:
            print(f"\n⚠️  Warning: Could not save to database: {e}")
            print("   Results are still available in the output files")
            return None


def run_experiment(config: ExperimentConfig) -> ExperimentOutcome:
    """
    Ingest, run all seeds, write the artifacts and record the run.

    Args:
        config: Experiment configuration

    Returns:
        ExperimentOutcome
    """
    runner = ExperimentRunner.from_config(config)
    outcome = runner.run()
    runner.save_results()
    if not config.no_db:
        runner._save_to_database()
    return outcome
