"""
Graph-regularized Wasserstein nonnegative tensor factorization.

Each outer iteration refreshes the relaxed transport plan of every
participating mode against the current reconstruction, then updates the
factor matrices in mode order with multiplicative majorize-minimize steps.
Every unfolding enters the objective through beta * KL(target_n || Xhat_(n)),
so each factor step pulls the reconstruction towards the mean of the
refolded targets (the target marginal for transported modes, the data for
the others). The sample factor (last mode) additionally carries the graph
smoothness penalty mu * sum_ij V_ij ||a_i - a_j||^2.

A transport refresh is kept only when it does not raise that mode's terms,
and each factor step minimizes a majorizer of the objective, so the
recorded objective never increases.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import GRAPH_RULES, get_thread_count
from .exceptions import ConfigError, NumericalAbort, ShapeError
from .graph import AffinityGraph, smoothness
from .models import FitReport, ObjectiveTerms
from .tensor import (
    DataTensor,
    KruskalFactors,
    coproduct_matrix,
    matricize,
    refold,
    unfolded_reconstruction,
)
from .transport import (
    CostMatrix,
    TransportHyperParams,
    TransportState,
    default_costs,
    kl_divergence,
    make_kernel,
    mode_terms,
    refine_mode,
    refresh_mode,
    target_marginal,
)

logger = logging.getLogger(__name__)

STOPPING_WINDOW = 3


@dataclass(frozen=True)
class GwntfConfig:
    """Inputs of a GWNTF run."""

    rank: int
    transport: TransportHyperParams = field(default_factory=TransportHyperParams)
    mu: float = 1e4
    graph: Optional[AffinityGraph] = None
    max_outer_iters: int = 200
    tol: float = 1e-5
    seed: int = 0
    wasserstein_modes: Optional[Tuple[int, ...]] = None
    costs: Optional[Sequence[CostMatrix]] = None
    graph_rule: str = "mm"
    threads: Optional[int] = None

    def __post_init__(self):
        if self.rank < 1:
            raise ConfigError(f"rank must be at least 1, got {self.rank}")
        if self.mu < 0:
            raise ConfigError(f"mu must be nonnegative, got {self.mu}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_outer_iters < 1:
            raise ConfigError(f"max_outer_iters must be at least 1, got {self.max_outer_iters}")
        if self.graph_rule not in GRAPH_RULES:
            raise ConfigError(f"Unknown graph rule {self.graph_rule!r}")
        if self.mu > 0 and self.graph is None:
            raise ConfigError("mu > 0 needs an affinity graph")

    def participating_modes(self, order: int) -> List[int]:
        if self.wasserstein_modes is None:
            return list(range(order))
        modes = sorted(set(self.wasserstein_modes))
        for mode in modes:
            if not 0 <= mode < order:
                raise ShapeError(f"Wasserstein mode {mode} out of range for a {order}-way tensor")
        return modes


def _check_finite(array: np.ndarray, operation: str, **context) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NumericalAbort(f"Non-finite values in {operation}", **context)
    return array


def update_factor(model: KruskalFactors, mode: int, target: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """
    Multiplicative KL step for one factor:
    A <- A * [(target / (A B^T)) B] / [1 B], with B the coproduct of the other factors.

    Args:
        model: Current factors
        mode: Factor to update
        target: Nonnegative I_n x I_-n matrix the unfolded reconstruction should approach
        floor: Lower bound for the reconstruction and the denominator

    Returns:
        The new factor matrix
    """
    factor = model.factors[mode]
    coproduct = coproduct_matrix(model, mode)
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (factor.shape[0], coproduct.shape[0]):
        raise ShapeError(f"Target shape {target.shape} does not match mode {mode} unfolding")
    ratio = target / np.maximum(factor @ coproduct.T, floor)
    numerator = ratio @ coproduct
    denominator = np.maximum(np.ones_like(target) @ coproduct, floor)
    return _check_finite(factor * (numerator / denominator), "update_factor", mode=mode)


def update_sample_factor(
    model: KruskalFactors,
    graph: Optional[AffinityGraph],
    target: np.ndarray,
    beta: float = 1.0,
    mu: float = 0.0,
    rule: str = "mm",
    floor: float = 1e-12,
) -> np.ndarray:
    """
    Update the last factor under beta * KL(target || A B^T) + mu * smoothness(graph, A).

    The "mm" rule minimizes a separable auxiliary function exactly: with
    a = 4 mu D_ii, b = beta (1 B)_ir and
    c = A_ir (beta [(target / A B^T) B]_ir + 4 mu (V A)_ir) the new entry is the
    positive root 2c / (b + sqrt(b^2 + 4ac)). The "printed" rule is the plain
    ratio A * (beta P + mu D A) / (beta 1 B + mu V A).

    Args:
        model: Current factors
        graph: Affinity graph over the samples (ignored when mu == 0)
        target: I_N x I_-N target matrix
        beta: Weight of the KL term
        mu: Weight of the smoothness term
        rule: "mm" or "printed"
        floor: Lower bound for denominators

    Returns:
        The new sample factor
    """
    mode = model.order - 1
    if mu == 0 or graph is None:
        return update_factor(model, mode, target, floor)
    if rule not in GRAPH_RULES:
        raise ConfigError(f"Unknown graph rule {rule!r}")

    factor = model.factors[mode]
    if graph.n_samples != factor.shape[0]:
        raise ShapeError(f"Graph on {graph.n_samples} samples, sample factor has {factor.shape[0]} rows")
    coproduct = coproduct_matrix(model, mode)
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (factor.shape[0], coproduct.shape[0]):
        raise ShapeError(f"Target shape {target.shape} does not match the sample unfolding")

    pull = (target / np.maximum(factor @ coproduct.T, floor)) @ coproduct
    mass = np.ones_like(target) @ coproduct
    neighbours = graph.weights @ factor
    degrees = graph.degrees[:, None]

    if rule == "printed":
        numerator = beta * pull + mu * degrees * factor
        denominator = np.maximum(beta * mass + mu * neighbours, floor)
        return _check_finite(factor * (numerator / denominator), "update_sample_factor", rule=rule)

    a = 4.0 * mu * degrees
    b = beta * mass
    c = factor * (beta * pull + 4.0 * mu * neighbours)
    root = np.maximum(b + np.sqrt(b ** 2 + 4.0 * a * c), floor)
    return _check_finite(2.0 * c / root, "update_sample_factor", rule=rule)


def gwntf_objective(
    x: DataTensor,
    model: KruskalFactors,
    states: Dict[int, TransportState],
    graph: Optional[AffinityGraph],
    cfg: GwntfConfig,
) -> ObjectiveTerms:
    """
    Transport cost, entropy and the two marginal KL terms of every
    participating mode, plus mu * smoothness of the sample factor.

    Modes without a transport state contribute beta * KL(X_(n) || Xhat_(n)).
    """
    h = cfg.transport
    costs = cfg.costs if cfg.costs is not None else default_costs(x.shape)
    transport = entropy = source_kl = target_kl = 0.0
    by_mode: Dict[int, float] = {}
    for mode in range(x.order):
        x_unf = matricize(x, mode)
        xhat_unf = unfolded_reconstruction(model, mode)
        if mode in states:
            terms = mode_terms(x_unf, xhat_unf, states[mode], costs[mode], h)
            transport += terms.transport
            entropy += terms.entropy
            source_kl += terms.source_kl
            target_kl += terms.target_kl
            by_mode[mode] = terms.total
        else:
            data_kl = h.beta * kl_divergence(x_unf, xhat_unf, h.floor)
            target_kl += data_kl
            by_mode[mode] = data_kl
    graph_term = 0.0
    if graph is not None and cfg.mu > 0:
        graph_term = cfg.mu * smoothness(graph, model.sample_factor)
    return ObjectiveTerms(
        transport=transport,
        entropy=entropy,
        source_kl=source_kl,
        target_kl=target_kl,
        graph=graph_term,
        by_mode=by_mode,
    )


def should_stop(totals: Sequence[float], tol: float, window: int = STOPPING_WINDOW) -> bool:
    """True when each of the last `window` relative changes is strictly below tol."""
    if len(totals) <= window:
        return False
    recent = totals[-(window + 1):]
    for previous, current in zip(recent, recent[1:]):
        change = abs(current - previous) / max(abs(previous), np.finfo(float).tiny)
        if not change < tol:
            return False
    return True


def _refresh_states(
    x: DataTensor,
    xhat: DataTensor,
    modes: List[int],
    kernels: Dict[int, np.ndarray],
    costs: Sequence[CostMatrix],
    h: TransportHyperParams,
    threads: int,
    previous: Dict[int, TransportState],
) -> Dict[int, TransportState]:
    def refresh(mode: int) -> TransportState:
        if mode not in previous:
            return refresh_mode(x, xhat, mode, kernels[mode], h)
        return refine_mode(x, xhat, previous[mode], costs[mode], h)

    if threads <= 1 or len(modes) <= 1:
        return {mode: refresh(mode) for mode in modes}
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {mode: pool.submit(refresh, mode) for mode in modes}
        return {mode: futures[mode].result() for mode in modes}


def pooled_target(x: DataTensor, states: Dict[int, TransportState]) -> np.ndarray:
    """
    Mean over all modes of the refolded factor-update targets.

    A transported mode contributes its target marginal, any other mode the
    data itself. Since sum_n KL(Y_n || Xhat) = N KL(mean Y || Xhat) + const,
    this is the tensor every factor step fits.
    """
    parts = [
        refold(target_marginal(states[mode]), x.shape, mode).data if mode in states else x.data
        for mode in range(x.order)
    ]
    return np.mean(parts, axis=0)


def factor_sweep(
    model: KruskalFactors,
    target: np.ndarray,
    graph: Optional[AffinityGraph],
    cfg: GwntfConfig,
) -> KruskalFactors:
    """
    Update every factor once, in mode order, against a target tensor.

    With `target` the pooled target of fixed transport states, each step
    does not increase the objective.
    """
    h = cfg.transport
    sample_mode = model.order - 1
    for mode in range(sample_mode):
        model = model.with_factor(mode, update_factor(model, mode, matricize(target, mode), h.floor))
    sample_factor = update_sample_factor(
        model,
        graph,
        matricize(target, sample_mode),
        beta=model.order * h.beta,
        mu=cfg.mu,
        rule=cfg.graph_rule,
        floor=h.floor,
    )
    return model.with_factor(sample_mode, sample_factor)


def prepare_input(x: DataTensor, floor: float) -> DataTensor:
    """Scale to [0, 1] and floor so every KL term stays finite."""
    return x.scaled_to_unit().floored(floor)


def gwntf_fit(x: DataTensor, cfg: GwntfConfig) -> FitReport:
    """
    Run the alternating GWNTF optimization.

    Args:
        x: Nonnegative data tensor, samples on the last mode
        cfg: Rank, transport hyperparameters, graph and stopping settings

    Returns:
        FitReport with the factors and the per-iteration objective
    """
    h = cfg.transport
    x = prepare_input(x, h.floor)
    order = x.order
    sample_mode = order - 1
    modes = cfg.participating_modes(order)
    costs = list(cfg.costs) if cfg.costs is not None else default_costs(x.shape)
    if len(costs) != order:
        raise ShapeError(f"Need one cost matrix per mode: {len(costs)} for {order} modes")
    for mode in modes:
        costs[mode] = CostMatrix.coerce(costs[mode])
        if costs[mode].size != x.shape[mode]:
            raise ShapeError(f"Cost for mode {mode} does not match extent {x.shape[mode]}")
    if cfg.graph is not None and cfg.graph.n_samples != x.shape[sample_mode]:
        raise ShapeError(f"Graph on {cfg.graph.n_samples} samples, tensor has {x.shape[sample_mode]}")
    if cfg.rank > min(x.shape):
        logger.warning("Rank %d exceeds the smallest mode size %d (overcomplete model)", cfg.rank, min(x.shape))

    threads = cfg.threads if cfg.threads is not None else get_thread_count()
    kernels = {mode: make_kernel(costs[mode], h.lam, h.floor) for mode in modes}
    model = KruskalFactors.random(x.shape, cfg.rank, cfg.seed).mass_matched(x.total_mass)

    trace: List[ObjectiveTerms] = []
    states: Dict[int, TransportState] = {}
    phase_seconds = {"transport": 0.0, "factors": 0.0, "objective": 0.0}
    converged = False
    iteration = 0
    for iteration in range(1, cfg.max_outer_iters + 1):
        try:
            started = time.perf_counter()
            xhat = refold(unfolded_reconstruction(model, 0), x.shape, 0)
            states = _refresh_states(x, xhat, modes, kernels, costs, h, threads, states)
            target = pooled_target(x, states)
            transported = time.perf_counter()

            model = factor_sweep(model, target, cfg.graph, cfg)
            updated = time.perf_counter()

            terms = gwntf_objective(x, model, states, cfg.graph, cfg)
        except NumericalAbort as e:
            raise NumericalAbort(str(e), outer_iteration=iteration) from e
        finished = time.perf_counter()
        phase_seconds["transport"] += transported - started
        phase_seconds["factors"] += updated - transported
        phase_seconds["objective"] += finished - updated

        trace.append(terms)
        logger.debug("GWNTF iteration %d: objective %.10g", iteration, terms.total)
        if should_stop([t.total for t in trace], cfg.tol):
            converged = True
            break

    logger.info(
        "GWNTF %s after %d iterations (objective %.6g)",
        "converged" if converged else "stopped",
        iteration,
        trace[-1].total,
    )
    return FitReport(
        factors=model,
        objective_trace=trace,
        iterations_run=iteration,
        converged=converged,
        algorithm="gwntf",
        phase_seconds=phase_seconds,
    )
