"""
Entropic optimal transport between nonnegative vectors, matrices and tensors.

Two families live here:

* balanced transport (`exact_ot`, `sinkhorn_distance` and the matrix/tensor
  distances built on it), where the plan must match both marginals;
* the KL-relaxed transport used by the factorization, where each column of a
  mode-n unfolding owns a plan slice diag(u) K diag(v) and the scalings U, V
  are refreshed by `update_scalings`.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog
from scipy.special import entr, kl_div, logsumexp

from .exceptions import (
    ConfigError,
    InfeasibleTransport,
    NumericalAbort,
    OracleLimitError,
    ShapeError,
)
from .tensor import DataTensor, TensorLike, matricize

logger = logging.getLogger(__name__)

DEFAULT_FLOOR = 1e-12
EXACT_OT_MAX_SIZE = 64
RELAXED_TOL = 1e-9
RELAXED_MAX_SWEEPS = 50_000
REFINE_ROUNDS = 20


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Symmetric ground-distance matrix with zero diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.float64, copy=True)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ShapeError(f"Cost matrix must be square, got shape {entries.shape}")
        if np.any(entries < 0):
            raise ShapeError("Cost matrix entries must be nonnegative")
        if np.any(np.diag(entries) != 0):
            raise ShapeError("Cost matrix diagonal must be zero")
        if not np.allclose(entries, entries.T, rtol=0.0, atol=1e-12):
            raise ShapeError("Cost matrix must be symmetric")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def coerce(cls, cost: Union["CostMatrix", np.ndarray]) -> "CostMatrix":
        return cost if isinstance(cost, CostMatrix) else cls(cost)


CostLike = Union[CostMatrix, np.ndarray]


@dataclass(frozen=True)
class TransportHyperParams:
    """Entropic sharpness and marginal-penalty weights."""

    lam: float = 100.0
    alpha: float = 1.0
    beta: float = 1.0
    sinkhorn_iters: int = 10
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError(f"alpha and beta must be nonnegative, got {self.alpha}, {self.beta}")
        if self.sinkhorn_iters < 1:
            raise ConfigError(f"sinkhorn_iters must be positive, got {self.sinkhorn_iters}")
        if not self.floor > 0:
            raise ConfigError(f"floor must be positive, got {self.floor}")

    @property
    def phi(self) -> float:
        return self.lam * self.alpha / (self.lam * self.alpha + 1.0)

    @property
    def psi(self) -> float:
        return self.lam * self.beta / (self.lam * self.beta + 1.0)


@dataclass(frozen=True, eq=False)
class TransportState:
    """Kernel and scalings for the mode-n plan slices."""

    mode: int
    kernel: np.ndarray
    scale_u: np.ndarray
    scale_v: np.ndarray


@dataclass(frozen=True, eq=False)
class Marginals:
    source: np.ndarray
    target: np.ndarray


@dataclass(frozen=True, eq=False)
class TransportSolution:
    """Result of a balanced transport solve."""

    distance: float
    plan: np.ndarray
    transport_cost: float
    entropy: float = 0.0
    converged: bool = True
    iterations: int = 0
    marginal_error: float = 0.0


@dataclass(frozen=True)
class ModeTerms:
    """Contributions of one mode to the relaxed tensor distance.

    `entropy` is the signed contribution -H(T_n)/lambda; the KL terms are
    already weighted by alpha and beta.
    """

    transport: float
    entropy: float
    source_kl: float
    target_kl: float

    @property
    def total(self) -> float:
        return self.transport + self.entropy + self.source_kl + self.target_kl


@dataclass(frozen=True)
class TensorDistance:
    by_mode: Dict[int, float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.by_mode.values()))


def grid_cost(n: int, exponent: float = 2.0, normalize: bool = True) -> CostMatrix:
    """
    Ground distance |i - j|^q between positions on a line.

    Args:
        n: Number of positions
        exponent: Power q > 0
        normalize: Divide by the largest entry so the maximum is 1

    Returns:
        CostMatrix of size n
    """
    if n < 1:
        raise ConfigError(f"Grid size must be positive, got {n}")
    if not exponent > 0:
        raise ConfigError(f"Grid cost exponent must be positive, got {exponent}")
    idx = np.arange(n, dtype=np.float64)
    cost = np.abs(idx[:, None] - idx[None, :]) ** exponent
    if normalize and cost.max() > 0:
        cost = cost / cost.max()
    return CostMatrix(cost)


def default_costs(shape: Sequence[int], exponent: float = 2.0, normalize: bool = True) -> List[CostMatrix]:
    """One normalized grid cost per mode."""
    return [grid_cost(extent, exponent, normalize) for extent in shape]


def make_kernel(cost: CostLike, lam: float, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Gibbs kernel exp(-lam * C - 1), clamped from below at `floor`."""
    if not lam > 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    entries = CostMatrix.coerce(cost).entries
    return np.maximum(np.exp(-lam * entries - 1.0), floor)


def kl_divergence(x: np.ndarray, y: np.ndarray, floor: float = DEFAULT_FLOOR) -> float:
    """Generalized KL divergence sum(x log(x/y) - x + y), with 0 log 0 = 0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"KL operands differ in shape: {x.shape} vs {y.shape}")
    return float(np.sum(kl_div(x, np.maximum(y, floor))))


def _check_finite(array: np.ndarray, operation: str, **context) -> None:
    if not np.all(np.isfinite(array)):
        raise NumericalAbort(f"Non-finite values in {operation}", **context)


def exact_ot(
    a: Sequence[float],
    b: Sequence[float],
    cost: CostLike,
    max_size: int = EXACT_OT_MAX_SIZE,
    tol: float = 1e-9,
) -> TransportSolution:
    """
    Exact transport distance by linear programming (dual simplex).

    Only meant for validating the entropic solvers on small problems.

    Args:
        a: Source masses
        b: Target masses, same total as `a`
        cost: Ground distances
        max_size: Largest supported support size
        tol: Allowed mismatch between the two total masses

    Returns:
        TransportSolution with the optimal plan
    """
    c = CostMatrix.coerce(cost).entries
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    m = c.shape[0]
    if a.size != m or b.size != m:
        raise ShapeError(f"Marginals of sizes {a.size}, {b.size} do not match cost size {m}")
    if m > max_size:
        raise OracleLimitError(f"exact_ot supports at most {max_size} points, got {m}")
    if np.any(a < 0) or np.any(b < 0):
        raise InfeasibleTransport("Marginals must be nonnegative")
    if abs(a.sum() - b.sum()) > tol:
        raise InfeasibleTransport(f"Mass mismatch: {a.sum()!r} vs {b.sum()!r}")
    if b.sum() > 0:
        b = b * (a.sum() / b.sum())

    # plan flattened row-major: row sums first, then column sums
    a_eq = np.vstack([np.kron(np.eye(m), np.ones(m)), np.kron(np.ones(m), np.eye(m))])
    result = linprog(
        c.ravel(),
        A_eq=a_eq,
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if result.status != 0:
        raise InfeasibleTransport(f"Transport LP failed: {result.message}")
    plan = np.maximum(result.x.reshape(m, m), 0.0)
    distance = float(np.sum(c * plan))
    return TransportSolution(distance=distance, plan=plan, transport_cost=distance)


def _as_probability(v: Sequence[float], floor: float) -> np.ndarray:
    v = np.maximum(np.asarray(v, dtype=np.float64).ravel(), floor)
    return v / v.sum()


def _lambda_schedule(lam: float, cost_scale: float) -> List[float]:
    """Geometric warm-up from the cost scale to the requested sharpness."""
    if cost_scale <= 0:
        return [lam]
    start = min(lam, 1.0 / cost_scale)
    steps = int(np.ceil(np.log2(lam / start)))
    return [start * 2.0 ** k for k in range(steps)] + [lam]


def _plan_from_potentials(f: np.ndarray, g: np.ndarray, c: np.ndarray, lam: float) -> np.ndarray:
    return np.exp(lam * (f[:, None] + g[None, :] - c) - 1.0)


def sinkhorn_distance(
    a: Sequence[float],
    b: Sequence[float],
    cost: CostLike,
    h: Optional[TransportHyperParams] = None,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> TransportSolution:
    """
    Entropic transport distance <C, T> - H(T)/lambda with hard marginals.

    The plan is diag(u) exp(-lambda C - 1) diag(v). Iterations run on dual
    potentials in the log domain, and lambda is annealed geometrically from
    the cost scale so that large values (hundreds) stay stable.

    Args:
        a: Source weights (floored and renormalized to a probability vector)
        b: Target weights (same treatment)
        cost: Ground distances
        h: Hyperparameters; only `lam` and `floor` are used
        tol: Target l1 marginal error
        max_iter: Iteration budget at the final lambda

    Returns:
        TransportSolution; `converged` is False when the budget ran out
    """
    h = h or TransportHyperParams()
    c = CostMatrix.coerce(cost).entries
    m = c.shape[0]
    a = _as_probability(a, h.floor)
    b = _as_probability(b, h.floor)
    if a.size != m or b.size != m:
        raise ShapeError(f"Marginals of sizes {a.size}, {b.size} do not match cost size {m}")
    log_a, log_b = np.log(a), np.log(b)

    f = np.zeros(m)
    g = np.zeros(m)
    schedule = _lambda_schedule(h.lam, float(c.max()))
    total_iterations = 0
    error = np.inf
    for stage, lam in enumerate(schedule):
        final = stage == len(schedule) - 1
        budget = max_iter if final else 1000
        stage_tol = tol if final else 1e-6
        for _ in range(budget):
            f = (log_a - logsumexp(lam * (g[None, :] - c), axis=1) + 1.0) / lam
            g = (log_b - logsumexp(lam * (f[:, None] - c), axis=0) + 1.0) / lam
            total_iterations += 1
            plan = _plan_from_potentials(f, g, c, lam)
            error = float(np.abs(plan.sum(axis=1) - a).sum() + np.abs(plan.sum(axis=0) - b).sum())
            if not np.isfinite(error):
                raise NumericalAbort("Non-finite values in sinkhorn_distance", lam=lam, iteration=total_iterations)
            if error < stage_tol:
                break

    plan = _plan_from_potentials(f, g, c, h.lam)
    converged = error < tol
    if not converged:
        logger.warning(
            "Sinkhorn did not converge in %d iterations (marginal error %.3e)", total_iterations, error
        )
    transport_cost = float(np.sum(c * plan))
    entropy = float(np.sum(entr(plan)))
    return TransportSolution(
        distance=transport_cost - entropy / h.lam,
        plan=plan,
        transport_cost=transport_cost,
        entropy=entropy,
        converged=converged,
        iterations=total_iterations,
        marginal_error=error,
    )


def wasserstein_matrix_distance(
    a_mat: np.ndarray,
    b_mat: np.ndarray,
    cost: CostLike,
    h: Optional[TransportHyperParams] = None,
) -> float:
    """Sum over columns of the entropic distance between matching columns."""
    a_mat = np.asarray(a_mat, dtype=np.float64)
    b_mat = np.asarray(b_mat, dtype=np.float64)
    if a_mat.ndim != 2 or a_mat.shape != b_mat.shape:
        raise ShapeError(f"Matrix distance needs equal-shape matrices, got {a_mat.shape} and {b_mat.shape}")
    cost = CostMatrix.coerce(cost)
    if cost.size != a_mat.shape[0]:
        raise ShapeError(f"Cost size {cost.size} does not match {a_mat.shape[0]} rows")
    return float(
        sum(sinkhorn_distance(a_mat[:, j], b_mat[:, j], cost, h).distance for j in range(a_mat.shape[1]))
    )


def _resolve_modes(order: int, modes: Optional[Iterable[int]]) -> List[int]:
    if modes is None:
        return list(range(order))
    modes = sorted(set(int(m) for m in modes))
    for mode in modes:
        if not 0 <= mode < order:
            raise ShapeError(f"Mode {mode} out of range for a {order}-way tensor")
    return modes


def _check_costs(shape: Sequence[int], costs: Optional[Sequence[CostLike]]) -> List[CostMatrix]:
    if costs is None:
        return default_costs(shape)
    if len(costs) != len(shape):
        raise ShapeError(f"Need one cost matrix per mode: {len(costs)} for {len(shape)} modes")
    costs = [CostMatrix.coerce(c) for c in costs]
    for mode, (extent, cost) in enumerate(zip(shape, costs)):
        if cost.size != extent:
            raise ShapeError(f"Cost for mode {mode} has size {cost.size}, mode extent is {extent}")
    return costs


def wasserstein_tensor_distance(
    x: TensorLike,
    y: TensorLike,
    costs: Optional[Sequence[CostLike]] = None,
    h: Optional[TransportHyperParams] = None,
    modes: Optional[Iterable[int]] = None,
) -> TensorDistance:
    """
    Sum over modes of the matrix distance between the mode-n unfoldings.

    Args:
        x: Source tensor
        y: Target tensor, same shape
        costs: One cost matrix per mode (normalized squared grid cost by default)
        h: Hyperparameters
        modes: Modes entering the sum (all by default)

    Returns:
        TensorDistance with the per-mode breakdown
    """
    x_data = x.data if isinstance(x, DataTensor) else np.asarray(x, dtype=np.float64)
    y_data = y.data if isinstance(y, DataTensor) else np.asarray(y, dtype=np.float64)
    if x_data.shape != y_data.shape:
        raise ShapeError(f"Tensor shapes differ: {x_data.shape} vs {y_data.shape}")
    costs = _check_costs(x_data.shape, costs)
    by_mode = {
        mode: wasserstein_matrix_distance(matricize(x_data, mode), matricize(y_data, mode), costs[mode], h)
        for mode in _resolve_modes(x_data.ndim, modes)
    }
    return TensorDistance(by_mode=by_mode)


def init_state(mode: int, kernel: np.ndarray, n_columns: int) -> TransportState:
    """Scalings at the start of a refresh: V = 1 / I_n, U = 1."""
    extent = kernel.shape[0]
    return TransportState(
        mode=mode,
        kernel=kernel,
        scale_u=np.ones((extent, n_columns)),
        scale_v=np.full((extent, n_columns), 1.0 / extent),
    )


def update_scalings(
    x_unf: np.ndarray,
    xhat_unf: np.ndarray,
    state: TransportState,
    h: TransportHyperParams,
    tol: Optional[float] = None,
    max_sweeps: int = RELAXED_MAX_SWEEPS,
) -> TransportState:
    """
    Inner scaling loop for the KL-relaxed plan slices of one mode.

    Repeats V <- Xhat^psi / (K^T (X^phi / (K V)^phi))^psi, then sets
    U <- X^phi / (K V)^phi. Powers and divisions are elementwise.

    Args:
        x_unf: Source unfolding X_(n)
        xhat_unf: Target unfolding Xhat_(n)
        state: Kernel and starting scalings
        h: Hyperparameters
        tol: When given, sweep until the largest relative change of V drops
            below tol; otherwise run exactly `h.sinkhorn_iters` sweeps
        max_sweeps: Sweep cap when sweeping to a tolerance

    Returns:
        New TransportState
    """
    kernel = state.kernel
    expected = (kernel.shape[0], state.scale_v.shape[1])
    if x_unf.shape != expected or xhat_unf.shape != expected:
        raise ShapeError(
            f"Unfoldings {x_unf.shape} / {xhat_unf.shape} do not match state shape {expected}"
        )
    floor = h.floor
    phi, psi = h.phi, h.psi
    x_phi = np.maximum(x_unf, floor) ** phi
    xhat_psi = np.maximum(xhat_unf, floor) ** psi

    v = state.scale_v
    budget = h.sinkhorn_iters if tol is None else max_sweeps
    change = np.inf
    for sweep in range(budget):
        u = x_phi / np.maximum(kernel @ v, floor) ** phi
        v_next = xhat_psi / np.maximum(kernel.T @ u, floor) ** psi
        _check_finite(v_next, "update_scalings", mode=state.mode, sweep=sweep)
        change = float(np.max(np.abs(v_next - v) / np.maximum(v_next, floor)))
        v = v_next
        if tol is not None and change < tol:
            break
    if tol is not None and not change < tol:
        logger.warning(
            "Scalings of mode %d did not settle in %d sweeps (relative change %.3e)", state.mode, budget, change
        )
    u = x_phi / np.maximum(kernel @ v, floor) ** phi
    _check_finite(u, "update_scalings", mode=state.mode)
    return TransportState(
        mode=state.mode,
        kernel=kernel,
        scale_u=np.maximum(u, floor),
        scale_v=np.maximum(v, floor),
    )


def marginals(state: TransportState) -> Marginals:
    """Row sums (source) and column sums (target) of every plan slice."""
    kernel, u, v = state.kernel, state.scale_u, state.scale_v
    return Marginals(source=u * (kernel @ v), target=v * (kernel.T @ u))


def target_marginal(state: TransportState) -> np.ndarray:
    return state.scale_v * (state.kernel.T @ state.scale_u)


def transport_terms(state: TransportState, cost: CostLike) -> Tuple[float, float]:
    """
    Transport cost sum_j <C, T_j> and entropy sum_j H(T_j) over all slices.

    Uses log T_j = log u_j + log K + log v_j, so the I_n x I_n x I_-n plan
    tensor is never formed.
    """
    c = CostMatrix.coerce(cost).entries
    kernel, u, v = state.kernel, state.scale_u, state.scale_v
    if c.shape != kernel.shape:
        raise ShapeError(f"Cost shape {c.shape} does not match kernel shape {kernel.shape}")
    transport = float(np.sum(u * ((kernel * c) @ v)))
    m = marginals(state)
    plogp = (
        np.sum(m.source * np.log(u))
        + np.sum(m.target * np.log(v))
        + np.sum(u * ((kernel * np.log(kernel)) @ v))
    )
    return transport, float(-plogp)


def mode_terms(
    x_unf: np.ndarray,
    xhat_unf: np.ndarray,
    state: TransportState,
    cost: CostLike,
    h: TransportHyperParams,
) -> ModeTerms:
    """Weighted contributions of one mode's plan to the relaxed distance."""
    transport, entropy = transport_terms(state, cost)
    m = marginals(state)
    return ModeTerms(
        transport=transport,
        entropy=-entropy / h.lam,
        source_kl=h.alpha * kl_divergence(m.source, x_unf, h.floor),
        target_kl=h.beta * kl_divergence(m.target, xhat_unf, h.floor),
    )


def refresh_mode(
    x: TensorLike,
    xhat: TensorLike,
    mode: int,
    kernel: np.ndarray,
    h: TransportHyperParams,
) -> TransportState:
    """Start a mode's scalings from scratch and run the inner loop."""
    x_unf = matricize(x, mode)
    state = init_state(mode, kernel, x_unf.shape[1])
    return update_scalings(x_unf, matricize(xhat, mode), state, h)


def refine_mode(
    x: TensorLike,
    xhat: TensorLike,
    state: TransportState,
    cost: CostLike,
    h: TransportHyperParams,
    max_rounds: int = REFINE_ROUNDS,
) -> TransportState:
    """
    Continue a mode's scalings from `state` without raising its objective.

    Runs rounds of `h.sinkhorn_iters` sweeps until the mode's relaxed terms
    against `xhat` are no larger than those of `state`. Keeps `state` when
    no round gets there.
    """
    x_unf = matricize(x, state.mode)
    xhat_unf = matricize(xhat, state.mode)
    baseline = mode_terms(x_unf, xhat_unf, state, cost, h).total
    candidate = state
    for _ in range(max_rounds):
        candidate = update_scalings(x_unf, xhat_unf, candidate, h)
        if mode_terms(x_unf, xhat_unf, candidate, cost, h).total <= baseline:
            return candidate
    logger.debug("Mode %d: %d refine rounds did not improve %.10g; keeping scalings", state.mode, max_rounds, baseline)
    return state


def relaxed_tensor_distance(
    x: TensorLike,
    y: TensorLike,
    costs: Optional[Sequence[CostLike]] = None,
    h: Optional[TransportHyperParams] = None,
    modes: Optional[Iterable[int]] = None,
    tol: float = RELAXED_TOL,
) -> Dict[int, ModeTerms]:
    """
    KL-relaxed tensor distance: per mode, plan cost minus entropy plus the
    alpha/beta-weighted KL mismatch of the plan's marginals.

    The scalings are swept until their relative change drops below `tol`,
    so with alpha == beta the value is symmetric in x and y.

    Returns:
        Mapping mode -> ModeTerms
    """
    h = h or TransportHyperParams()
    x_data = x.data if isinstance(x, DataTensor) else np.asarray(x, dtype=np.float64)
    y_data = y.data if isinstance(y, DataTensor) else np.asarray(y, dtype=np.float64)
    if x_data.shape != y_data.shape:
        raise ShapeError(f"Tensor shapes differ: {x_data.shape} vs {y_data.shape}")
    costs = _check_costs(x_data.shape, costs)
    terms = {}
    for mode in _resolve_modes(x_data.ndim, modes):
        x_unf, y_unf = matricize(x_data, mode), matricize(y_data, mode)
        start = init_state(mode, make_kernel(costs[mode], h.lam, h.floor), x_unf.shape[1])
        state = update_scalings(x_unf, y_unf, start, h, tol=tol)
        terms[mode] = mode_terms(x_unf, y_unf, state, costs[mode], h)
    return terms
