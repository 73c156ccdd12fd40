"""
Tests for the tensor module.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gwntf.exceptions import ShapeError, TensorFormatError
from gwntf.tensor import (
    DataTensor,
    KruskalFactors,
    coproduct_matrix,
    khatri_rao,
    matricize,
    reconstruct,
    refold,
    unfolded_reconstruction,
)


class TestDataTensor:
    """Test the DataTensor container."""

    def test_from_flat_is_column_major(self, cube_tensor):
        """The first index varies fastest in the flat view."""
        assert cube_tensor.shape == (2, 2, 2)
        assert cube_tensor.data[1, 0, 0] == 2
        assert cube_tensor.data[0, 1, 0] == 3
        assert cube_tensor.data[0, 0, 1] == 5
        np.testing.assert_array_equal(cube_tensor.flat_values(), np.arange(1, 9))

    def test_from_flat_wrong_count(self):
        """A value count that does not match the shape is rejected."""
        with pytest.raises(ShapeError):
            DataTensor.from_flat((2, 3), np.arange(5))

    def test_rejects_one_mode(self):
        with pytest.raises(ShapeError):
            DataTensor(np.ones(4))

    def test_rejects_empty_extent(self):
        with pytest.raises(ShapeError):
            DataTensor(np.ones((3, 0)))

    def test_rejects_negative_entries(self):
        """Negative values violate nonnegativity."""
        with pytest.raises(TensorFormatError):
            DataTensor(np.array([[1.0, -0.5], [0.0, 2.0]]))

    def test_rejects_nan(self):
        with pytest.raises(TensorFormatError):
            DataTensor(np.array([[1.0, np.nan], [0.0, 2.0]]))

    def test_data_is_read_only_copy(self):
        """The container copies its input and freezes it."""
        source = np.ones((2, 3))
        tensor = DataTensor(source)
        source[0, 0] = 5.0
        assert tensor.data[0, 0] == 1.0
        with pytest.raises(ValueError):
            tensor.data[0, 0] = 2.0

    def test_properties(self, cube_tensor):
        assert cube_tensor.order == 3
        assert cube_tensor.size == 8
        assert cube_tensor.total_mass == 36.0

    def test_scaled_to_unit(self, cube_tensor):
        """Scaling divides by the global maximum."""
        scaled = cube_tensor.scaled_to_unit()
        assert scaled.data.max() == 1.0
        np.testing.assert_allclose(scaled.flat_values(), np.arange(1, 9) / 8.0)

    def test_scaled_to_unit_all_zero(self):
        """An all-zero tensor is returned unchanged."""
        zeros = DataTensor(np.zeros((2, 2)))
        assert zeros.scaled_to_unit() is zeros

    def test_floored(self):
        floored = DataTensor(np.array([[0.0, 2.0], [0.5, 0.0]])).floored(1e-3)
        np.testing.assert_array_equal(floored.data, [[1e-3, 2.0], [0.5, 1e-3]])

    def test_equals(self, cube_tensor):
        same = DataTensor.from_flat((2, 2, 2), np.arange(1, 9))
        other = DataTensor.from_flat((2, 4), np.arange(1, 9))
        assert cube_tensor.equals(same)
        assert not cube_tensor.equals(other)


class TestMatricize:
    """Test unfolding and refolding."""

    def test_mode_zero_unfolding(self, cube_tensor):
        """Mode-0 unfolding of 1..8 is [[1,3,5,7],[2,4,6,8]]."""
        np.testing.assert_array_equal(
            matricize(cube_tensor, 0),
            [[1, 3, 5, 7], [2, 4, 6, 8]],
        )

    def test_mode_one_unfolding(self, cube_tensor):
        """Remaining indices are enumerated first index fastest."""
        np.testing.assert_array_equal(
            matricize(cube_tensor, 1),
            [[1, 2, 5, 6], [3, 4, 7, 8]],
        )

    def test_mode_two_unfolding(self, cube_tensor):
        np.testing.assert_array_equal(
            matricize(cube_tensor, 2),
            [[1, 2, 3, 4], [5, 6, 7, 8]],
        )

    def test_mode_out_of_range(self, cube_tensor):
        with pytest.raises(ShapeError):
            matricize(cube_tensor, 3)
        with pytest.raises(ShapeError):
            matricize(cube_tensor, -1)

    def test_refold_inverts_every_mode(self, random_tensor):
        for mode in range(random_tensor.order):
            back = refold(matricize(random_tensor, mode), random_tensor.shape, mode)
            assert back.equals(random_tensor)

    def test_refold_shape_mismatch(self):
        with pytest.raises(ShapeError):
            refold(np.ones((2, 3)), (2, 2, 2), 0)

    @given(
        shape=st.lists(st.integers(min_value=1, max_value=4), min_size=2, max_size=4),
        data=st.data(),
    )
    @settings(max_examples=40, deadline=None)
    def test_unfolding_preserves_entries(self, shape, data):
        """Every unfolding is a permutation of the same entries."""
        values = np.arange(1, int(np.prod(shape)) + 1, dtype=np.float64)
        tensor = DataTensor.from_flat(shape, values)
        mode = data.draw(st.integers(min_value=0, max_value=len(shape) - 1))
        unfolded = matricize(tensor, mode)
        assert unfolded.shape == (shape[mode], int(np.prod(shape)) // shape[mode])
        np.testing.assert_array_equal(np.sort(unfolded.ravel()), values)


class TestKhatriRao:
    """Test the column-wise Kronecker product."""

    def test_two_matrices(self):
        """[[1,2],[3,4]] and [[5,6],[7,8]] give the documented product."""
        product = khatri_rao([np.array([[1, 2], [3, 4]]), np.array([[5, 6], [7, 8]])])
        np.testing.assert_array_equal(product, [[5, 12], [7, 16], [15, 24], [21, 32]])

    def test_single_matrix_is_copied(self):
        mat = np.array([[1.0, 2.0]])
        product = khatri_rao([mat])
        np.testing.assert_array_equal(product, mat)
        assert product is not mat

    def test_column_mismatch(self):
        with pytest.raises(ShapeError):
            khatri_rao([np.ones((2, 2)), np.ones((2, 3))])

    def test_empty(self):
        with pytest.raises(ShapeError):
            khatri_rao([])

    def test_three_matrices_shape(self):
        product = khatri_rao([np.ones((2, 3)), np.ones((4, 3)), np.ones((5, 3))])
        assert product.shape == (40, 3)


class TestKruskalFactors:
    """Test the CP model container."""

    def test_random_is_seeded_and_positive(self):
        first = KruskalFactors.random((3, 4, 5), rank=2, seed=11)
        second = KruskalFactors.random((3, 4, 5), rank=2, seed=11)
        assert first.shape == (3, 4, 5)
        assert first.rank == 2
        assert first.order == 3
        for a, b in zip(first.factors, second.factors):
            np.testing.assert_array_equal(a, b)
            assert np.all(a > 0) and np.all(a <= 1)

    def test_rejects_mismatched_ranks(self):
        with pytest.raises(ShapeError):
            KruskalFactors((np.ones((2, 2)), np.ones((3, 3))))

    def test_rejects_negative_factor(self):
        with pytest.raises(ShapeError):
            KruskalFactors((np.ones((2, 2)), -np.ones((3, 2))))

    def test_rejects_single_factor(self):
        with pytest.raises(ShapeError):
            KruskalFactors((np.ones((2, 2)),))

    def test_with_factor_leaves_original(self):
        model = KruskalFactors.random((2, 3), rank=2, seed=0)
        updated = model.with_factor(1, np.zeros((3, 2)))
        assert np.all(model.factors[1] > 0)
        assert np.all(updated.factors[1] == 0)
        np.testing.assert_array_equal(updated.factors[0], model.factors[0])

    def test_total_mass_matches_reconstruction(self):
        model = KruskalFactors.random((3, 4, 2), rank=3, seed=5)
        assert model.total_mass == pytest.approx(reconstruct(model).total_mass, rel=1e-12)

    def test_mass_matched(self):
        model = KruskalFactors.random((3, 4, 2), rank=3, seed=5).mass_matched(10.0)
        assert model.total_mass == pytest.approx(10.0, rel=1e-12)


class TestReconstruction:
    """Test the Kruskal reconstruction and its unfoldings."""

    def test_rank_one_is_outer_product(self):
        a, b, c = np.array([1.0, 2.0]), np.array([3.0, 4.0, 5.0]), np.array([6.0, 7.0])
        model = KruskalFactors((a[:, None], b[:, None], c[:, None]))
        expected = np.einsum("i,j,k->ijk", a, b, c)
        np.testing.assert_allclose(reconstruct(model).data, expected)

    def test_unfolding_identity_for_every_mode(self):
        """matricize(reconstruct(model), n) == A_n B_n^T with the reversed coproduct."""
        model = KruskalFactors.random((3, 4, 5, 2), rank=3, seed=2)
        full = reconstruct(model)
        for mode in range(model.order):
            np.testing.assert_allclose(
                matricize(full, mode),
                model.factors[mode] @ coproduct_matrix(model, mode).T,
                rtol=1e-12,
            )
            np.testing.assert_allclose(
                unfolded_reconstruction(model, mode), matricize(full, mode), rtol=1e-12
            )

    def test_coproduct_shape(self):
        model = KruskalFactors.random((3, 4, 5), rank=2, seed=2)
        assert coproduct_matrix(model, 1).shape == (15, 2)
        with pytest.raises(ShapeError):
            coproduct_matrix(model, 3)
