"""Container construction and validation."""

import numpy as np
import pytest

from sara import (
    BinGrid,
    FeatureMap,
    GradBundle,
    PooledGrid,
    ProbMap,
    RoiBox,
    validate_feature_map,
    validate_prob_map,
)
from sara.errors import LengthMismatchError, NonFiniteValueError, RangeViolationError


class TestFeatureMap:
    def test_valid(self):
        fm = validate_feature_map(1, 2, 2, [1, 2, 3, 4])
        assert fm.channels == 1 and fm.height == 2 and fm.width == 2
        assert fm.data.dtype == np.float32
        np.testing.assert_array_equal(fm.data, [[[1, 2], [3, 4]]])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            validate_feature_map(1, 2, 2, [1, 2, 3])

    def test_nan_rejected(self):
        with pytest.raises(NonFiniteValueError):
            validate_feature_map(1, 2, 2, [1, 2, np.nan, 4])

    def test_inf_rejected(self):
        with pytest.raises(NonFiniteValueError):
            FeatureMap(np.full((1, 2, 2), np.inf, np.float32))

    def test_nonpositive_dims(self):
        with pytest.raises(ValueError):
            validate_feature_map(0, 2, 2, [])

    def test_immutable(self):
        fm = validate_feature_map(1, 2, 2, [1, 2, 3, 4])
        with pytest.raises(ValueError):
            fm.data[0, 0, 0] = 9


class TestProbMap:
    def test_valid(self):
        pm = validate_prob_map(2, 2, [0.5, 0.5, 0.5, 0.5])
        assert pm.height == 2 and pm.width == 2

    def test_above_one(self):
        with pytest.raises(RangeViolationError):
            validate_prob_map(2, 2, [0.5, 1.2, 0.5, 0.5])

    def test_below_zero(self):
        with pytest.raises(RangeViolationError):
            validate_prob_map(2, 2, [0.5, -0.1, 0.5, 0.5])

    def test_negative_zero_ok(self):
        pm = validate_prob_map(2, 2, [0.0, -0.0, 1.0, 0.5])
        assert pm.data[0, 1] == 0.0

    def test_nan_rejected(self):
        with pytest.raises(RangeViolationError):
            validate_prob_map(2, 2, [0.5, np.nan, 0.5, 0.5])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            validate_prob_map(2, 2, [0.5])


class TestRoiBox:
    def test_valid(self):
        box = RoiBox(1.5, 2.0, 4.0, 6.0)
        assert box.width == 2.5 and box.height == 4.0 and box.area == 10.0

    @pytest.mark.parametrize("coords", [(0, 0, 0, 1), (0, 0, 1, 0), (2, 0, 1, 1)])
    def test_empty_extent(self, coords):
        with pytest.raises(ValueError):
            RoiBox(*coords)

    def test_nonfinite(self):
        with pytest.raises(NonFiniteValueError):
            RoiBox(0, 0, np.inf, 1)

    def test_out_of_map_allowed(self):
        RoiBox(-5.0, -3.0, 2.0, 1.0)  # sampling handles out-of-range


class TestBinGrid:
    def test_samples_per_bin(self):
        assert BinGrid(7, 7, 2).samples_per_bin == 4

    @pytest.mark.parametrize("dims", [(0, 1, 1), (1, 0, 1), (1, 1, 0)])
    def test_positive(self, dims):
        with pytest.raises(ValueError):
            BinGrid(*dims)


class TestPooledGrid:
    def test_grid_shape_checked(self):
        with pytest.raises(LengthMismatchError):
            PooledGrid(np.zeros((1, 2, 2), np.float32), BinGrid(3, 3, 1))

    def test_float64_allowed(self):
        pg = PooledGrid(np.zeros((1, 2, 2), np.float64))
        assert pg.data.dtype == np.float64


class TestGradBundle:
    def test_shapes(self):
        gb = GradBundle(np.zeros((2, 3, 4), np.float32), np.zeros((5, 5), np.float32))
        assert gb.grad_feature.shape == (2, 3, 4)
        assert gb.grad_prob.shape == (5, 5)

    def test_nonfinite_rejected(self):
        with pytest.raises(NonFiniteValueError):
            GradBundle(np.full((1, 1, 1), np.nan, np.float32))

    def test_prob_optional(self):
        assert GradBundle(np.zeros((1, 1, 1), np.float32)).grad_prob is None
