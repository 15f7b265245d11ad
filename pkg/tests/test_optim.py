"""Tests for the Adam optimizer and global-norm clipping."""

from __future__ import annotations

import numpy as np
import pytest

from lstm_ids.config import ModelConfig
from lstm_ids.exceptions import ConfigError, ShapeError
from lstm_ids.nn.lstm import init_params
from lstm_ids.nn.optim import (
    OptimizerState,
    adam_step,
    adam_update,
    clip_by_global_norm,
    global_norm,
)


def _params():
    return init_params(ModelConfig(layer_cells=(3,)), 2, 2, seed=4)


class TestAdamStep:

    def test_zero_gradient_leaves_params(self):
        params = _params()
        before = [a.copy() for a in params.arrays()]
        state = OptimizerState.for_params(params, 0.01)
        adam_step(params, params.zeros_like(), state)
        assert state.step == 1
        assert all(np.array_equal(a, b) for a, b in zip(params.arrays(), before))

    def test_first_step_moves_by_learning_rate(self):
        theta = np.array([0.5])
        state = OptimizerState(learning_rate=0.01)
        adam_update([theta], [np.array([1.0])], state)
        assert 0.5 - theta[0] == pytest.approx(0.01, rel=1e-5)

    def test_quadratic_converges(self):
        theta = np.array([1.0])
        state = OptimizerState(learning_rate=0.1)
        for _ in range(100):
            adam_update([theta], [2.0 * theta.copy()], state)
        assert abs(theta[0]) < 0.1

    def test_matches_scalar_recurrence(self):
        theta = np.array([1.0])
        state = OptimizerState(learning_rate=0.05)
        m = v = 0.0
        ref = 1.0
        for t in range(1, 11):
            g = 2.0 * ref
            m = 0.9 * m + (1 - 0.9) * g
            v = 0.999 * v + (1 - 0.999) * g * g
            ref -= 0.05 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-7)
            adam_update([theta], [2.0 * theta.copy()], state)
        assert theta[0] == pytest.approx(ref, abs=1e-12)

    def test_shapes_unchanged_and_deterministic(self, rng):
        grads = _params().from_arrays([rng.normal(size=a.shape) for a in _params().arrays()])
        results = []
        for _ in range(2):
            params = _params()
            state = OptimizerState.for_params(params, 0.002)
            for _ in range(3):
                adam_step(params, grads, state)
            results.append(params)
        a, b = results
        assert [x.shape for x in a.arrays()] == [x.shape for x in _params().arrays()]
        assert all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))

    def test_gradient_shape_mismatch(self):
        with pytest.raises(ShapeError):
            adam_update([np.zeros(2)], [np.zeros(3)], OptimizerState(learning_rate=0.1))

    def test_invalid_hyperparameters_all_reported(self):
        with pytest.raises(ConfigError) as excinfo:
            OptimizerState(learning_rate=0.0, beta1=1.0, epsilon=0.0)
        assert len(excinfo.value.violations) == 3


class TestClipping:

    def test_no_clip_when_unset(self, rng):
        grads = _params().from_arrays([rng.normal(size=a.shape) for a in _params().arrays()])
        before = global_norm(grads)
        assert clip_by_global_norm(grads, None) == before
        assert global_norm(grads) == before

    def test_clips_to_max_norm(self, rng):
        grads = _params().from_arrays(
            [rng.normal(scale=10, size=a.shape) for a in _params().arrays()])
        norm = clip_by_global_norm(grads, 1.0)
        assert norm > 1.0
        assert global_norm(grads) == pytest.approx(1.0, rel=1e-12)

    def test_small_gradients_untouched(self, rng):
        grads = _params().from_arrays(
            [rng.normal(scale=1e-3, size=a.shape) for a in _params().arrays()])
        before = [g.copy() for g in grads.arrays()]
        clip_by_global_norm(grads, 100.0)
        assert all(np.array_equal(a, b) for a, b in zip(grads.arrays(), before))
