"""
Tests for the transport module.
"""

import logging

import numpy as np
import pytest
from scipy.special import entr

from gwntf.exceptions import ConfigError, InfeasibleTransport, NumericalAbort, OracleLimitError, ShapeError
from gwntf.tensor import DataTensor, matricize
from gwntf.transport import (
    CostMatrix,
    TransportHyperParams,
    exact_ot,
    grid_cost,
    init_state,
    kl_divergence,
    make_kernel,
    marginals,
    mode_terms,
    refine_mode,
    refresh_mode,
    relaxed_tensor_distance,
    sinkhorn_distance,
    target_marginal,
    transport_terms,
    update_scalings,
    wasserstein_matrix_distance,
    wasserstein_tensor_distance,
)


def random_cost(rng, m):
    """Symmetric cost with zero diagonal and off-diagonal entries in [0.1, 1]."""
    c = rng.uniform(0.1, 1.0, (m, m))
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 0.0)
    return CostMatrix(c)


def line_distance(a, b):
    """Closed-form transport cost on a unit-step line with cost |i - j|."""
    return float(np.abs(np.cumsum(a) - np.cumsum(b)).sum())


class TestCostMatrix:
    """Test ground-distance validation."""

    def test_accepts_grid(self):
        assert grid_cost(4).size == 4

    def test_rejects_non_square(self):
        with pytest.raises(ShapeError):
            CostMatrix(np.zeros((2, 3)))

    def test_rejects_negative(self):
        with pytest.raises(ShapeError):
            CostMatrix(np.array([[0.0, -1.0], [-1.0, 0.0]]))

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(ShapeError):
            CostMatrix(np.array([[1.0, 1.0], [1.0, 0.0]]))

    def test_rejects_asymmetric(self):
        with pytest.raises(ShapeError):
            CostMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))

    def test_coerce_keeps_instance(self):
        cost = grid_cost(3)
        assert CostMatrix.coerce(cost) is cost
        assert isinstance(CostMatrix.coerce(np.zeros((2, 2))), CostMatrix)


class TestGridCost:
    """Test the line ground distance."""

    def test_unnormalized_linear(self):
        np.testing.assert_array_equal(
            grid_cost(3, exponent=1, normalize=False).entries,
            [[0, 1, 2], [1, 0, 1], [2, 1, 0]],
        )

    def test_normalized_squared(self):
        np.testing.assert_array_equal(grid_cost(2).entries, [[0, 1], [1, 0]])
        np.testing.assert_allclose(grid_cost(3).entries, [[0, 0.25, 1], [0.25, 0, 0.25], [1, 0.25, 0]])

    def test_single_point(self):
        np.testing.assert_array_equal(grid_cost(1).entries, [[0.0]])

    def test_invalid_arguments(self):
        with pytest.raises(ConfigError):
            grid_cost(0)
        with pytest.raises(ConfigError):
            grid_cost(3, exponent=0)


class TestHyperParams:
    """Test TransportHyperParams."""

    def test_defaults(self):
        h = TransportHyperParams()
        assert (h.lam, h.alpha, h.beta, h.sinkhorn_iters) == (100.0, 1.0, 1.0, 10)

    def test_exponents(self):
        h = TransportHyperParams(lam=100, alpha=1, beta=0)
        assert h.phi == pytest.approx(100 / 101)
        assert h.psi == 0.0

    @pytest.mark.parametrize("kwargs", [
        {"lam": 0},
        {"alpha": -1},
        {"beta": -0.5},
        {"sinkhorn_iters": 0},
        {"floor": 0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            TransportHyperParams(**kwargs)


class TestKernelAndKl:
    """Test the Gibbs kernel and the generalized KL divergence."""

    def test_kernel_values(self):
        kernel = make_kernel(grid_cost(2), lam=2.0)
        np.testing.assert_allclose(kernel, [[np.exp(-1), np.exp(-3)], [np.exp(-3), np.exp(-1)]])

    def test_kernel_is_floored(self):
        kernel = make_kernel(grid_cost(2), lam=5000.0, floor=1e-12)
        assert kernel[0, 1] == 1e-12

    def test_kernel_rejects_bad_lambda(self):
        with pytest.raises(ConfigError):
            make_kernel(grid_cost(2), lam=-1.0)

    def test_kl_example(self):
        """KL([1] || [e]) = e - 2."""
        assert kl_divergence(np.array([1.0]), np.array([np.e])) == pytest.approx(np.e - 2)

    def test_kl_zero_for_equal(self):
        x = np.array([[0.2, 0.0], [1.5, 3.0]])
        assert kl_divergence(x, x) == pytest.approx(0.0, abs=1e-10)

    def test_kl_shape_mismatch(self):
        with pytest.raises(ShapeError):
            kl_divergence(np.ones(2), np.ones(3))


class TestExactOt:
    """Test the linear-programming transport oracle."""

    def test_line_example(self):
        a = np.array([0.1, 0.2, 0.3, 0.4])
        b = np.array([0.4, 0.3, 0.2, 0.1])
        solution = exact_ot(a, b, grid_cost(4, exponent=1, normalize=False))
        assert solution.distance == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(solution.plan.sum(axis=1), a, atol=1e-9)
        np.testing.assert_allclose(solution.plan.sum(axis=0), b, atol=1e-9)

    def test_matches_line_closed_form(self):
        rng = np.random.default_rng(0)
        for m in range(2, 9):
            a, b = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
            solution = exact_ot(a, b, grid_cost(m, exponent=1, normalize=False))
            assert solution.distance == pytest.approx(line_distance(a, b), abs=1e-8)

    def test_identical_marginals(self):
        a = np.array([0.5, 0.25, 0.25])
        assert exact_ot(a, a, grid_cost(3)).distance == pytest.approx(0.0, abs=1e-12)

    def test_mass_mismatch(self):
        with pytest.raises(InfeasibleTransport):
            exact_ot([0.5, 0.5], [0.5, 0.6], grid_cost(2))

    def test_size_limit(self):
        a = np.full(65, 1 / 65)
        with pytest.raises(OracleLimitError):
            exact_ot(a, a, grid_cost(65))

    def test_size_mismatch(self):
        with pytest.raises(ShapeError):
            exact_ot([1.0], [0.5, 0.5], grid_cost(2))


class TestSinkhornDistance:
    """Test the balanced entropic solver."""

    def _check_against_oracle(self, rng, instances):
        h = TransportHyperParams(lam=500)
        for _ in range(instances):
            m = int(rng.integers(3, 9))
            a, b = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
            cost = random_cost(rng, m)
            exact = exact_ot(a, b, cost).distance
            solution = sinkhorn_distance(a, b, cost, h)
            assert solution.converged
            assert solution.marginal_error < 1e-8
            assert abs(solution.transport_cost - exact) <= 0.01 * exact + 1e-4

    def test_close_to_exact(self):
        """lambda = 500 recovers the exact cost within one percent."""
        self._check_against_oracle(np.random.default_rng(1), instances=5)

    @pytest.mark.slow
    def test_close_to_exact_many_instances(self):
        self._check_against_oracle(np.random.default_rng(2), instances=50)

    def test_plan_marginals(self):
        a = np.array([0.2, 0.3, 0.5])
        b = np.array([0.6, 0.1, 0.3])
        solution = sinkhorn_distance(a, b, grid_cost(3), TransportHyperParams(lam=50))
        np.testing.assert_allclose(solution.plan.sum(axis=1), a, atol=1e-9)
        np.testing.assert_allclose(solution.plan.sum(axis=0), b, atol=1e-9)
        assert solution.distance == pytest.approx(solution.transport_cost - solution.entropy / 50)
        assert solution.entropy == pytest.approx(float(np.sum(entr(solution.plan))))

    def test_small_lambda_gives_independent_coupling(self):
        """As lambda -> 0 the plan tends to the product a b^T."""
        rng = np.random.default_rng(5)
        a, b = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
        solution = sinkhorn_distance(a, b, grid_cost(5), TransportHyperParams(lam=1e-6))
        assert solution.converged
        np.testing.assert_allclose(solution.plan, np.outer(a, b), atol=1e-6)

    def test_inputs_are_normalized(self):
        """Weights are renormalized to probability vectors."""
        h = TransportHyperParams(lam=50)
        a = np.array([2.0, 3.0, 5.0])
        b = np.array([6.0, 1.0, 3.0])
        scaled = sinkhorn_distance(a, b, grid_cost(3), h)
        unit = sinkhorn_distance(a / 10, b / 10, grid_cost(3), h)
        assert scaled.distance == pytest.approx(unit.distance, rel=1e-9)

    def test_point_masses_far_apart(self):
        """Sharp kernels on point masses stay finite."""
        solution = sinkhorn_distance([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], grid_cost(3), TransportHyperParams(lam=200))
        assert np.isfinite(solution.distance)
        assert np.all(np.isfinite(solution.plan))
        assert solution.transport_cost == pytest.approx(1.0, abs=1e-6)

    def test_budget_exhaustion_warns(self, caplog):
        rng = np.random.default_rng(4)
        a, b = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
        with caplog.at_level(logging.WARNING, logger="gwntf.transport"):
            solution = sinkhorn_distance(a, b, random_cost(rng, 6), TransportHyperParams(lam=500), max_iter=1)
        assert not solution.converged
        assert "did not converge" in caplog.text

    def test_size_mismatch(self):
        with pytest.raises(ShapeError):
            sinkhorn_distance([0.5, 0.5], [1.0, 0.0, 0.0], grid_cost(3))


class TestMatrixAndTensorDistance:
    """Test the column-wise and mode-wise sums."""

    def test_matrix_distance_sums_columns(self):
        rng = np.random.default_rng(5)
        a_mat, b_mat = rng.random((3, 2)) + 0.1, rng.random((3, 2)) + 0.1
        h = TransportHyperParams(lam=20)
        expected = sum(sinkhorn_distance(a_mat[:, j], b_mat[:, j], grid_cost(3), h).distance for j in range(2))
        assert wasserstein_matrix_distance(a_mat, b_mat, grid_cost(3), h) == pytest.approx(expected)

    def test_matrix_distance_shape_mismatch(self):
        with pytest.raises(ShapeError):
            wasserstein_matrix_distance(np.ones((3, 2)), np.ones((3, 3)), grid_cost(3))
        with pytest.raises(ShapeError):
            wasserstein_matrix_distance(np.ones((3, 2)), np.ones((3, 2)), grid_cost(4))

    def test_tensor_distance_modes(self):
        rng = np.random.default_rng(6)
        x, y = DataTensor(rng.random((3, 2, 2)) + 0.1), DataTensor(rng.random((3, 2, 2)) + 0.1)
        h = TransportHyperParams(lam=20)
        distance = wasserstein_tensor_distance(x, y, h=h, modes=[0, 2])
        assert sorted(distance.by_mode) == [0, 2]
        assert distance.by_mode[0] == pytest.approx(
            wasserstein_matrix_distance(matricize(x, 0), matricize(y, 0), grid_cost(3), h)
        )
        assert distance.total == pytest.approx(distance.by_mode[0] + distance.by_mode[2])

    def test_tensor_distance_invalid_mode(self):
        x = DataTensor(np.ones((2, 2)))
        with pytest.raises(ShapeError):
            wasserstein_tensor_distance(x, x, modes=[2])

    def test_tensor_distance_wrong_cost_count(self):
        x = DataTensor(np.ones((2, 2)))
        with pytest.raises(ShapeError):
            wasserstein_tensor_distance(x, x, costs=[grid_cost(2)])

    def test_decreases_along_interpolation(self):
        """Moving Y straight towards X never increases the distance."""
        rng = np.random.default_rng(8)
        x = rng.random((3, 3, 3)) + 0.1
        y = rng.random((3, 3, 3)) + 0.1
        h = TransportHyperParams(lam=50)
        values = [
            wasserstein_tensor_distance(x, (1 - t) * y + t * x, h=h).total
            for t in np.linspace(0.0, 1.0, 6)
        ]
        assert np.all(np.diff(values) < 1e-9)


class TestRelaxedTransport:
    """Test the KL-relaxed scalings used by the factorization."""

    @staticmethod
    def _setup(rng, extent=3, columns=4):
        x = rng.random((extent, columns)) + 0.1
        xhat = rng.random((extent, columns)) + 0.1
        return x, xhat

    def test_init_state(self):
        kernel = make_kernel(grid_cost(4), 10.0)
        state = init_state(1, kernel, 5)
        assert state.mode == 1
        np.testing.assert_array_equal(state.scale_u, np.ones((4, 5)))
        np.testing.assert_array_equal(state.scale_v, np.full((4, 5), 0.25))

    def test_source_marginal_tracks_data(self):
        """With beta = 0 and a large alpha the source marginal is close to X."""
        rng = np.random.default_rng(9)
        x, xhat = self._setup(rng, extent=4, columns=6)
        h = TransportHyperParams(lam=100, alpha=10, beta=0, sinkhorn_iters=20)
        kernel = make_kernel(grid_cost(4), h.lam)
        state = update_scalings(x, xhat, init_state(0, kernel, 6), h)
        source = marginals(state).source
        column_error = np.abs(source - x).sum(axis=0) / x.sum(axis=0)
        assert np.all(column_error < 0.01)

    def test_scalings_reach_fixed_point(self):
        rng = np.random.default_rng(10)
        x, xhat = self._setup(rng)
        h = TransportHyperParams(lam=100, sinkhorn_iters=3000)
        kernel = make_kernel(grid_cost(3), h.lam)
        state = update_scalings(x, xhat, init_state(0, kernel, 4), h)
        again = update_scalings(x, xhat, state, TransportHyperParams(lam=100, sinkhorn_iters=1))
        np.testing.assert_allclose(np.log(again.scale_v), np.log(state.scale_v), atol=1e-8)

    def test_zero_cost_symmetry(self):
        """With C = 0, X = Xhat and alpha = beta both marginals agree."""
        rng = np.random.default_rng(11)
        x, _ = self._setup(rng)
        h = TransportHyperParams(lam=100, sinkhorn_iters=2000)
        kernel = make_kernel(np.zeros((3, 3)), h.lam)
        state = update_scalings(x, x, init_state(0, kernel, 4), h)
        m = marginals(state)
        np.testing.assert_allclose(m.source, m.target, rtol=1e-8)

    def test_target_marginal_matches(self):
        rng = np.random.default_rng(12)
        x, xhat = self._setup(rng)
        h = TransportHyperParams(lam=30)
        state = update_scalings(x, xhat, init_state(0, make_kernel(grid_cost(3), h.lam), 4), h)
        np.testing.assert_array_equal(target_marginal(state), marginals(state).target)
        assert np.all(state.scale_u > 0) and np.all(state.scale_v > 0)

    def test_shape_mismatch(self):
        kernel = make_kernel(grid_cost(3), 10.0)
        with pytest.raises(ShapeError):
            update_scalings(np.ones((3, 2)), np.ones((3, 4)), init_state(0, kernel, 4), TransportHyperParams())

    def test_nan_aborts(self):
        kernel = make_kernel(grid_cost(3), 10.0)
        x = np.ones((3, 4))
        x[1, 2] = np.nan
        with pytest.raises(NumericalAbort) as exc_info:
            update_scalings(x, np.ones((3, 4)), init_state(2, kernel, 4), TransportHyperParams())
        assert exc_info.value.context["mode"] == 2

    def test_transport_terms_match_explicit_plans(self):
        """The implicit evaluation agrees with summing over the plan slices."""
        rng = np.random.default_rng(13)
        x, xhat = self._setup(rng)
        h = TransportHyperParams(lam=20)
        cost = grid_cost(3)
        kernel = make_kernel(cost, h.lam)
        state = update_scalings(x, xhat, init_state(0, kernel, 4), h)
        plans = [
            state.scale_u[:, j][:, None] * kernel * state.scale_v[:, j][None, :]
            for j in range(4)
        ]
        transport, entropy = transport_terms(state, cost)
        assert transport == pytest.approx(sum(float(np.sum(cost.entries * p)) for p in plans), rel=1e-10)
        assert entropy == pytest.approx(sum(float(np.sum(entr(p))) for p in plans), rel=1e-10)

    def test_mode_terms_weighting(self):
        rng = np.random.default_rng(14)
        x, xhat = self._setup(rng)
        h = TransportHyperParams(lam=20, alpha=2.0, beta=3.0)
        cost = grid_cost(3)
        state = update_scalings(x, xhat, init_state(0, make_kernel(cost, h.lam), 4), h)
        terms = mode_terms(x, xhat, state, cost, h)
        transport, entropy = transport_terms(state, cost)
        m = marginals(state)
        assert terms.transport == pytest.approx(transport)
        assert terms.entropy == pytest.approx(-entropy / 20)
        assert terms.source_kl == pytest.approx(2.0 * kl_divergence(m.source, x))
        assert terms.target_kl == pytest.approx(3.0 * kl_divergence(m.target, xhat))
        assert terms.total == pytest.approx(terms.transport + terms.entropy + terms.source_kl + terms.target_kl)

    def test_refresh_mode_starts_from_scratch(self, random_tensor):
        h = TransportHyperParams(lam=20)
        kernel = make_kernel(grid_cost(5), h.lam)
        xhat = DataTensor(random_tensor.data[::-1].copy())
        state = refresh_mode(random_tensor, xhat, 1, kernel, h)
        expected = update_scalings(
            matricize(random_tensor, 1), matricize(xhat, 1), init_state(1, kernel, 24), h
        )
        np.testing.assert_array_equal(state.scale_v, expected.scale_v)
        assert state.mode == 1

    def test_relaxed_tensor_distance(self, random_tensor):
        terms = relaxed_tensor_distance(random_tensor, random_tensor, h=TransportHyperParams(lam=20), modes=[1])
        assert list(terms) == [1]
        assert np.isfinite(terms[1].total)

    def test_relaxed_tensor_distance_symmetric(self):
        """With alpha == beta swapping the arguments leaves every mode's value unchanged."""
        rng = np.random.default_rng(15)
        x = DataTensor(rng.random((3, 3, 3)) + 0.05)
        y = DataTensor(rng.random((3, 3, 3)) + 0.05)
        h = TransportHyperParams(lam=100, alpha=1.0, beta=1.0)
        forward = relaxed_tensor_distance(x, y, h=h)
        backward = relaxed_tensor_distance(y, x, h=h)
        for mode in range(3):
            assert forward[mode].total == pytest.approx(backward[mode].total, rel=1e-5)

    def test_scalings_all_ones_without_marginal_penalties(self):
        """alpha = beta = 0 gives phi = psi = 0 and exactly unit scalings."""
        rng = np.random.default_rng(16)
        x, xhat = self._setup(rng)
        h = TransportHyperParams(lam=100, alpha=0.0, beta=0.0)
        state = update_scalings(x, xhat, init_state(0, make_kernel(grid_cost(3), h.lam), 4), h)
        np.testing.assert_array_equal(state.scale_u, np.ones((3, 4)))
        np.testing.assert_array_equal(state.scale_v, np.ones((3, 4)))

    def test_tolerance_mode_settles(self):
        rng = np.random.default_rng(17)
        x, xhat = self._setup(rng)
        h = TransportHyperParams(lam=20)
        kernel = make_kernel(grid_cost(3), h.lam)
        state = update_scalings(x, xhat, init_state(0, kernel, 4), h, tol=1e-12)
        again = update_scalings(x, xhat, state, TransportHyperParams(lam=20, sinkhorn_iters=1))
        np.testing.assert_allclose(again.scale_v, state.scale_v, rtol=1e-9)

    def test_tolerance_mode_warns_when_capped(self, caplog):
        rng = np.random.default_rng(18)
        x, xhat = self._setup(rng)
        h = TransportHyperParams(lam=100)
        kernel = make_kernel(grid_cost(3), h.lam)
        with caplog.at_level(logging.WARNING, logger="gwntf.transport"):
            update_scalings(x, xhat, init_state(0, kernel, 4), h, tol=1e-12, max_sweeps=2)
        assert "did not settle" in caplog.text

    def test_refine_mode_never_raises_terms(self, random_tensor):
        """Warm-started rounds against a new target never score worse than the old scalings."""
        h = TransportHyperParams(lam=100)
        cost = grid_cost(5)
        kernel = make_kernel(cost, h.lam)
        old_target = DataTensor(random_tensor.data[::-1].copy())
        state = refresh_mode(random_tensor, old_target, 1, kernel, h)
        x_unf = matricize(random_tensor, 1)
        for shift in (0.9, 1.1, 2.0):
            new_target = DataTensor(shift * old_target.data)
            refined = refine_mode(random_tensor, new_target, state, cost, h)
            xhat_unf = matricize(new_target, 1)
            before = mode_terms(x_unf, xhat_unf, state, cost, h).total
            after = mode_terms(x_unf, xhat_unf, refined, cost, h).total
            assert after <= before
            assert refined.mode == 1

    def test_refine_mode_keeps_state_without_rounds(self, random_tensor):
        h = TransportHyperParams(lam=20)
        cost = grid_cost(4)
        state = refresh_mode(random_tensor, random_tensor, 0, make_kernel(cost, h.lam), h)
        assert refine_mode(random_tensor, random_tensor, state, cost, h, max_rounds=0) is state
