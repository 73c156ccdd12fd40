"""
Baseline factorizations with the KL loss: NCP, graph-regularized NCP and the
matrix variants NMF / GNMF on the sample unfolding.

They share the seeding, flooring and stopping rules of `gwntf_fit`, so a
comparison isolates the loss function.
"""

import logging
from typing import List, Optional, Union

import numpy as np

from .exceptions import NumericalAbort, ShapeError
from .factorize import prepare_input, should_stop, update_factor, update_sample_factor
from .graph import AffinityGraph, smoothness
from .models import FitReport, ObjectiveTerms
from .tensor import DataTensor, KruskalFactors, matricize, unfolded_reconstruction
from .transport import DEFAULT_FLOOR, kl_divergence

logger = logging.getLogger(__name__)


def _kl_cp_fit(
    x: DataTensor,
    rank: int,
    graph: Optional[AffinityGraph],
    mu: float,
    iters: int,
    seed: int,
    tol: float,
    rule: str,
    algorithm: str,
    floor: float = DEFAULT_FLOOR,
) -> FitReport:
    x = prepare_input(x, floor)
    sample_mode = x.order - 1
    if graph is not None and graph.n_samples != x.shape[sample_mode]:
        raise ShapeError(f"Graph on {graph.n_samples} samples, tensor has {x.shape[sample_mode]}")
    x_unf = [matricize(x, mode) for mode in range(x.order)]
    model = KruskalFactors.random(x.shape, rank, seed).mass_matched(x.total_mass)

    trace: List[ObjectiveTerms] = []
    converged = False
    sweep = 0
    for sweep in range(1, iters + 1):
        try:
            for mode in range(sample_mode):
                model = model.with_factor(mode, update_factor(model, mode, x_unf[mode], floor))
            sample_factor = update_sample_factor(
                model, graph, x_unf[sample_mode], beta=1.0, mu=mu, rule=rule, floor=floor
            )
            model = model.with_factor(sample_mode, sample_factor)
        except NumericalAbort as e:
            raise NumericalAbort(str(e), algorithm=algorithm, sweep=sweep) from e

        graph_term = mu * smoothness(graph, model.sample_factor) if graph is not None and mu > 0 else 0.0
        terms = ObjectiveTerms(
            target_kl=kl_divergence(x_unf[0], unfolded_reconstruction(model, 0), floor),
            graph=graph_term,
        )
        trace.append(terms)
        logger.debug("%s sweep %d: objective %.10g", algorithm.upper(), sweep, terms.total)
        if should_stop([t.total for t in trace], tol):
            converged = True
            break

    return FitReport(
        factors=model,
        objective_trace=trace,
        iterations_run=sweep,
        converged=converged,
        algorithm=algorithm,
    )


def ncp_fit(x: DataTensor, rank: int, iters: int = 200, seed: int = 0, tol: float = 1e-5) -> FitReport:
    """
    Nonnegative CP decomposition minimizing KL(X || Xhat) with multiplicative updates.

    Args:
        x: Data tensor, samples on the last mode
        rank: Number of components
        iters: Maximum number of sweeps
        seed: Initialization seed
        tol: Relative objective change that stops the run

    Returns:
        FitReport; the factors are in `report.factors`
    """
    return _kl_cp_fit(x, rank, None, 0.0, iters, seed, tol, "mm", "ncp")


def gncp_fit(
    x: DataTensor,
    rank: int,
    graph: AffinityGraph,
    mu: float,
    iters: int = 200,
    seed: int = 0,
    tol: float = 1e-5,
    rule: str = "mm",
) -> FitReport:
    """NCP with mu * smoothness(graph, sample factor) added to the loss."""
    return _kl_cp_fit(x, rank, graph, mu, iters, seed, tol, rule, "gncp")


def _as_sample_matrix(x_mat: Union[np.ndarray, DataTensor]) -> DataTensor:
    # features x samples, so the sample factor is the last one
    if isinstance(x_mat, DataTensor):
        x_mat = matricize(x_mat, x_mat.order - 1)
    x_mat = np.asarray(x_mat, dtype=np.float64)
    if x_mat.ndim != 2:
        raise ShapeError(f"NMF needs a samples x features matrix, got {x_mat.ndim} dimensions")
    return DataTensor(x_mat.T)


def nmf_fit(x_mat: Union[np.ndarray, DataTensor], rank: int, iters: int = 200, seed: int = 0, tol: float = 1e-5) -> FitReport:
    """
    KL-NMF of a samples x features matrix (or of a tensor's sample unfolding).

    The factors are (W, H) with X^T ~= W H^T: W is features x R, H is the
    samples x R embedding.
    """
    return _kl_cp_fit(_as_sample_matrix(x_mat), rank, None, 0.0, iters, seed, tol, "mm", "nmf")


def gnmf_fit(
    x_mat: Union[np.ndarray, DataTensor],
    rank: int,
    graph: AffinityGraph,
    lam: float,
    iters: int = 200,
    seed: int = 0,
    tol: float = 1e-5,
    rule: str = "mm",
) -> FitReport:
    """Graph-regularized KL-NMF; `lam` weighs the smoothness of H."""
    return _kl_cp_fit(_as_sample_matrix(x_mat), rank, graph, lam, iters, seed, tol, rule, "gnmf")
