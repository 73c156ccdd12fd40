"""
Result records: objective breakdowns, fit reports, clustering scores and
benchmark rows.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .tensor import KruskalFactors

MI_NORMALIZATION = "max_entropy"
METRICS = ("acc", "nmi", "mi", "purity")


@dataclass(frozen=True)
class ObjectiveTerms:
    """
    One evaluation of a factorization objective.

    For the KL baselines only `target_kl` (the data-vs-reconstruction KL)
    and `graph` are nonzero.
    """

    transport: float = 0.0
    entropy: float = 0.0  # -H/lambda, already signed
    source_kl: float = 0.0
    target_kl: float = 0.0
    graph: float = 0.0
    by_mode: Dict[int, float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.transport + self.entropy + self.source_kl + self.target_kl + self.graph

    def to_dict(self) -> Dict[str, Any]:
        return {
            "total": self.total,
            "transport": self.transport,
            "entropy": self.entropy,
            "source_kl": self.source_kl,
            "target_kl": self.target_kl,
            "graph": self.graph,
            "by_mode": {str(mode): value for mode, value in sorted(self.by_mode.items())},
        }


@dataclass(eq=False)
class FitReport:
    """Outcome of one factorization run."""

    factors: KruskalFactors
    objective_trace: List[ObjectiveTerms]
    iterations_run: int
    converged: bool
    algorithm: str = "gwntf"
    phase_seconds: Dict[str, float] = field(default_factory=dict)

    @property
    def final_objective(self) -> Optional[float]:
        return self.objective_trace[-1].total if self.objective_trace else None

    @property
    def max_relative_increase(self) -> float:
        """Largest relative step-to-step increase of the total objective (0 if none)."""
        totals = [terms.total for terms in self.objective_trace]
        worst = 0.0
        for previous, current in zip(totals, totals[1:]):
            increase = (current - previous) / max(abs(previous), np.finfo(float).tiny)
            worst = max(worst, increase)
        return worst

    def to_dict(self) -> Dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "iterations_run": self.iterations_run,
            "converged": self.converged,
            "final_objective": self.final_objective,
            "max_relative_increase": self.max_relative_increase,
            "phase_seconds": dict(self.phase_seconds),
            "objective_trace": [terms.to_dict() for terms in self.objective_trace],
        }


@dataclass(eq=False)
class ClusteringResult:
    """Scores of one k-means clustering against the ground truth."""

    seed: int
    predicted: np.ndarray
    truth: np.ndarray
    acc: float
    nmi: float
    mi: float  # normalized by max(H(pred), H(truth))
    mi_raw: float  # nats
    purity: float

    def scores(self) -> Dict[str, float]:
        return {"acc": self.acc, "nmi": self.nmi, "mi": self.mi, "mi_raw": self.mi_raw, "purity": self.purity}


@dataclass(eq=False)
class ClusteringSummary:
    """Per-seed clustering results with their mean and standard deviation."""

    results: List[ClusteringResult]

    def __post_init__(self):
        self.results = sorted(self.results, key=lambda r: r.seed)

    def _values(self, metric: str) -> np.ndarray:
        return np.array([getattr(r, metric) for r in self.results], dtype=np.float64)

    def mean(self, metric: str) -> float:
        return float(np.mean(self._values(metric))) if self.results else float("nan")

    def std(self, metric: str) -> float:
        return float(np.std(self._values(metric))) if self.results else float("nan")

    @property
    def seeds(self) -> List[int]:
        return [r.seed for r in self.results]

    def to_dict(self) -> Dict[str, Any]:
        summary: Dict[str, Any] = {"mi_normalization": MI_NORMALIZATION, "seeds": self.seeds}
        for metric in METRICS + ("mi_raw",):
            summary[metric] = {"mean": self.mean(metric), "std": self.std(metric)}
        summary["per_seed"] = [dict(seed=r.seed, **r.scores()) for r in self.results]
        return summary

    def to_csv_row(self) -> List[str]:
        row = []
        for metric in METRICS:
            row += [f"{self.mean(metric):.6f}", f"{self.std(metric):.6f}"]
        return row


@dataclass(eq=False)
class SeedOutcome:
    """One Monte-Carlo run: either a clustering result or the error that stopped it."""

    seed: int
    clustering: Optional[ClusteringResult] = None
    fit: Optional[FitReport] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.clustering is None


@dataclass(eq=False)
class ResultRow:
    """One line of the benchmark results table."""

    algorithm: str
    dataset: str
    summary: ClusteringSummary
    runs: int
    failures: int
    config_hash: str
    wall_clock_s: float = 0.0

    # wall-clock stays out of the CSV so reruns produce identical files
    CSV_HEADER = (
        "algorithm", "dataset",
        "acc_mean", "acc_std", "nmi_mean", "nmi_std",
        "mi_mean", "mi_std", "purity_mean", "purity_std",
        "runs", "failures", "mi_normalization", "config_hash",
    )

    def to_csv_row(self) -> List[str]:
        return (
            [self.algorithm, self.dataset]
            + self.summary.to_csv_row()
            + [str(self.runs), str(self.failures), MI_NORMALIZATION, self.config_hash]
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "dataset": self.dataset,
            "runs": self.runs,
            "failures": self.failures,
            "config_hash": self.config_hash,
            "wall_clock_s": self.wall_clock_s,
            "summary": self.summary.to_dict(),
        }
