import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fenec import PreprocessConfig, apply_preprocessing, sample_normalize, tukey_transform
from fenec.errors import ConfigError, DataError, NormalizationError

matrices = st.lists(
    st.lists(st.floats(0.0, 100.0, allow_nan=False), min_size=3, max_size=3),
    min_size=1,
    max_size=6,
).map(lambda rows: np.array(rows, dtype=np.float64))


class TestTukey:
    def test_square_root_case(self):
        np.testing.assert_allclose(tukey_transform(np.array([[4.0, 9.0]]), 0.5), [[2.0, 3.0]])

    def test_identity_at_one(self, rng):
        x = np.abs(rng.normal(size=(5, 4)))
        np.testing.assert_array_equal(tukey_transform(x, 1.0), x)

    def test_best_resnet_exponent_is_valid_config(self):
        assert PreprocessConfig(tukey_lambda=0.38).tukey_lambda == 0.38

    def test_negative_entry_rejected(self):
        with pytest.raises(DataError):
            tukey_transform(np.array([[1.0, -0.1]]), 0.5)

    def test_non_positive_exponent_rejected(self):
        with pytest.raises(ConfigError):
            tukey_transform(np.ones((1, 1)), 0.0)

    @given(matrices)
    @settings(max_examples=50, deadline=None)
    def test_monotone_per_coordinate(self, x):
        y = x + 0.5
        tx, ty = tukey_transform(x, 0.7), tukey_transform(y, 0.7)
        assert np.all(tx <= ty)

    @given(matrices, st.floats(0.1, 3.0), st.floats(0.1, 3.0))
    @settings(max_examples=50, deadline=None)
    def test_composition_multiplies_exponents(self, x, a, b):
        lhs = tukey_transform(tukey_transform(x, a), b)
        rhs = tukey_transform(x, a * b)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-12)


class TestSampleNormalize:
    def test_three_four_five(self):
        np.testing.assert_allclose(sample_normalize(np.array([[3.0, 4.0]])), [[0.6, 0.8]])

    def test_unit_row_unchanged(self):
        row = np.array([[0.6, 0.8]])
        np.testing.assert_allclose(sample_normalize(row), row, atol=1e-15)

    def test_random_rows_have_unit_norm(self, rng):
        x = rng.normal(size=(10, 5))
        norms = np.linalg.norm(sample_normalize(x), axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_idempotent(self, rng):
        x = rng.normal(size=(8, 3))
        once = sample_normalize(x)
        np.testing.assert_allclose(sample_normalize(once), once, atol=1e-12)

    def test_zero_row_rejected(self):
        with pytest.raises(NormalizationError):
            sample_normalize(np.array([[1.0, 1.0], [0.0, 0.0]]))


def test_pipeline_applies_tukey_before_normalization(rng):
    x = np.abs(rng.normal(size=(6, 4))) + 0.1
    cfg = PreprocessConfig(tukey_lambda=0.5, sample_normalize=True)
    np.testing.assert_allclose(
        apply_preprocessing(x, cfg), sample_normalize(tukey_transform(x, 0.5))
    )
