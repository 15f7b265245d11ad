"""Tests for the dense matrix and activation kernels."""

from __future__ import annotations

import numpy as np
import pytest

from lstm_ids.exceptions import ConfigError, ShapeError
from lstm_ids.nn.linalg import apply, as_matrix, elementwise, matmul, sigmoid, tanh


def _triple_loop(a, b):
    rows, inner = a.shape
    cols = b.shape[1]
    out = np.zeros((rows, cols))
    for r in range(rows):
        for c in range(cols):
            total = 0.0
            for k in range(inner):
                total += a[r, k] * b[k, c]
            out[r, c] = total
    return out


class TestMatmul:

    def test_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(matmul(np.eye(2), m), m)

    def test_row_by_column(self):
        assert matmul([[1.0, 2.0]], [[3.0], [4.0]]).tolist() == [[11.0]]

    def test_matches_triple_loop(self, rng):
        a = rng.normal(size=(5, 7))
        b = rng.normal(size=(7, 3))
        np.testing.assert_allclose(matmul(a, b), _triple_loop(a, b), rtol=0, atol=1e-12)

    def test_associative(self, rng):
        a, b, c = rng.normal(size=(3, 4)), rng.normal(size=(4, 5)), rng.normal(size=(5, 2))
        np.testing.assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)),
                                   rtol=1e-9)

    def test_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match="2×3.*2×3"):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_inputs_untouched(self, rng):
        a = rng.normal(size=(2, 2))
        before = a.copy()
        matmul(a, a)
        assert np.array_equal(a, before)


class TestElementwise:

    def test_identities(self, rng):
        a = rng.normal(size=(3, 4))
        assert np.array_equal(elementwise("add", a, np.zeros_like(a)), a)
        assert np.array_equal(elementwise("mul", a, np.ones_like(a)), a)
        assert not elementwise("sub", a, a).any()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError, match="identical shapes"):
            elementwise("add", np.ones((2, 2)), np.ones((2, 3)))

    def test_unknown_op(self):
        with pytest.raises(ConfigError, match="div"):
            elementwise("div", np.ones(1), np.ones(1))


class TestActivations:

    def test_fixed_points(self):
        assert apply("sigmoid", np.zeros((1, 1)))[0, 0] == 0.5
        assert apply("tanh", np.zeros((1, 1)))[0, 0] == 0.0

    def test_sigmoid_symmetry(self, rng):
        x = rng.normal(scale=10, size=100)
        np.testing.assert_allclose(sigmoid(x) + sigmoid(-x), 1.0, atol=1e-15)

    def test_ranges(self, rng):
        x = rng.normal(scale=5, size=1000)
        s, t = sigmoid(x), tanh(x)
        assert ((s > 0) & (s < 1)).all()
        assert ((t > -1) & (t < 1)).all()

    def test_sigmoid_saturates_without_nan(self):
        out = sigmoid(np.array([-1000.0, 1000.0]))
        assert np.isfinite(out).all()
        assert out[0] == 0.0 and out[1] == 1.0

    def test_unknown_activation(self):
        with pytest.raises(ConfigError, match="relu"):
            apply("relu", np.ones(1))


class TestCoercion:

    def test_vector_becomes_row(self):
        assert as_matrix([1, 2, 3]).shape == (1, 3)

    def test_empty_rejected(self):
        with pytest.raises(ShapeError, match="at least one"):
            as_matrix(np.zeros((0, 2)))
