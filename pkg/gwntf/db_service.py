"""
Database service for saving and retrieving benchmark results.
"""

import uuid
from typing import Any, Dict, List, Optional

import numpy as np

from .database import ExperimentRun, SeedResult, SessionLocal
from .db_init import check_tables_exist, create_tables_if_not_exist
from .models import METRICS, ResultRow, SeedOutcome


class DatabaseService:
    """Service for database operations."""

    def __init__(self):
        self.session = SessionLocal()
        # Ensure tables exist before using the service
        self._ensure_tables_exist()

    def _ensure_tables_exist(self):
        """Ensure database tables exist, create them if they don't."""
        try:
            if not check_tables_exist():
                print("🔧 Creating missing database tables...")
                create_tables_if_not_exist()
        except Exception as e:
            print(f"⚠️  Warning: Could not verify/create tables: {e}")

    def save_experiment_run(
        self,
        row: ResultRow,
        outcomes: List[SeedOutcome],
        config: Dict[str, Any],
        notes: Optional[str] = None,
    ) -> str:
        """
        Save a benchmark row together with its per-seed results.

        Args:
            row: Aggregated result row
            outcomes: One outcome per Monte-Carlo seed
            config: Configuration echo stored as JSON
            notes: Optional notes

        Returns:
            Experiment run ID
        """
        try:
            summary = row.summary
            experiment_run = ExperimentRun(
                algorithm=row.algorithm,
                dataset=row.dataset,
                config_hash=row.config_hash,
                config=config,
                runs=row.runs,
                failures=row.failures,
                wall_clock_s=row.wall_clock_s,
                notes=notes,
                **{f"{m}_mean": summary.mean(m) for m in METRICS},
                **{f"{m}_std": summary.std(m) for m in METRICS},
            )

            self.session.add(experiment_run)
            self.session.flush()  # Get the ID

            for outcome in outcomes:
                scores = outcome.clustering.scores() if outcome.clustering is not None else {}
                fit = outcome.fit
                self.session.add(SeedResult(
                    experiment_run_id=experiment_run.id,
                    seed=outcome.seed,
                    iterations=fit.iterations_run if fit is not None else None,
                    converged=fit.converged if fit is not None else None,
                    final_objective=fit.final_objective if fit is not None else None,
                    failed=outcome.failed,
                    error=outcome.error,
                    **scores,
                ))

            self.session.commit()
            return str(experiment_run.id)

        except Exception as e:
            self.session.rollback()
            raise e
        finally:
            self.session.close()

    def get_experiment_runs(self, limit: int = 50) -> List[Dict[str, Any]]:
        """
        Get recent experiment runs.

        Args:
            limit: Maximum number of runs to return

        Returns:
            List of experiment run data
        """
        runs = self.session.query(ExperimentRun).order_by(
            ExperimentRun.created_at.desc()
        ).limit(limit).all()

        return [_run_to_dict(run) for run in runs]

    def get_experiment_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        """
        Get a specific experiment run with all seed results.

        Args:
            run_id: Experiment run ID

        Returns:
            Experiment run data with seed results, or None
        """
        try:
            key = uuid.UUID(str(run_id))
        except ValueError:
            return None

        run = self.session.query(ExperimentRun).filter(ExperimentRun.id == key).first()
        if not run:
            return None

        seed_results = self.session.query(SeedResult).filter(
            SeedResult.experiment_run_id == key
        ).order_by(SeedResult.seed).all()

        data = _run_to_dict(run)
        data['config'] = run.config
        data['seed_results'] = [
            {
                'seed': sr.seed,
                'acc': sr.acc,
                'nmi': sr.nmi,
                'mi': sr.mi,
                'mi_raw': sr.mi_raw,
                'purity': sr.purity,
                'iterations': sr.iterations,
                'converged': sr.converged,
                'final_objective': sr.final_objective,
                'failed': sr.failed,
                'error': sr.error,
            }
            for sr in seed_results
        ]
        return data

    def get_config_stats(self, config_hash: str) -> Dict[str, Any]:
        """
        Aggregate every successful seed across all runs of one configuration.

        Args:
            config_hash: Configuration hash

        Returns:
            Statistics dictionary (empty if the hash is unknown)
        """
        runs = self.session.query(ExperimentRun).filter(
            ExperimentRun.config_hash == config_hash
        ).all()
        if not runs:
            return {}

        seed_results = self.session.query(SeedResult).filter(
            SeedResult.experiment_run_id.in_([run.id for run in runs])
        ).all()
        succeeded = [sr for sr in seed_results if not sr.failed]

        stats: Dict[str, Any] = {
            'config_hash': config_hash,
            'algorithm': runs[0].algorithm,
            'dataset': runs[0].dataset,
            'experiment_runs': len(runs),
            'seed_runs': len(seed_results),
            'failures': len(seed_results) - len(succeeded),
        }
        for metric in METRICS:
            values = np.array([getattr(sr, metric) for sr in succeeded], dtype=np.float64)
            stats[metric] = {
                'mean': float(values.mean()) if values.size else None,
                'std': float(values.std()) if values.size else None,
            }
        return stats

    def close(self):
        """Close the database session."""
        self.session.close()


def _run_to_dict(run: ExperimentRun) -> Dict[str, Any]:
    return {
        'id': str(run.id),
        'created_at': run.created_at,
        'algorithm': run.algorithm,
        'dataset': run.dataset,
        'config_hash': run.config_hash,
        'runs': run.runs,
        'failures': run.failures,
        'acc_mean': run.acc_mean,
        'nmi_mean': run.nmi_mean,
        'mi_mean': run.mi_mean,
        'purity_mean': run.purity_mean,
        'wall_clock_s': run.wall_clock_s,
        'notes': run.notes,
    }
