"""Tests for the training loop, prediction and evaluation."""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np
import pytest

from lstm_ids.data.preprocess import ColumnStats, window
from lstm_ids.data.schemas import DatasetSchema
from lstm_ids.exceptions import ConfigError, DataError, SchemaMismatchError, ShapeError, TrainingError
from lstm_ids.metrics import accuracy
from lstm_ids.observability import current_context
from lstm_ids.training import evaluate, predict, train
from lstm_ids.training.trainer import model_inputs, score


def _same_params(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))


@pytest.fixture()
def split3(make_split):
    return make_split(timesteps=3)


@pytest.fixture()
def trained(split3, tiny_config):
    return train(split3.train, tiny_config, split3.validation, workers=1)


class TestTrain:

    def test_history_one_entry_per_epoch(self, trained, tiny_config):
        assert [e.epoch for e in trained.history] == [1, 2, 3]
        for e in trained.history:
            assert np.isfinite([e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy]).all()

    def test_deterministic(self, split3, tiny_config, trained):
        again = train(split3.train, tiny_config, split3.validation, workers=1)
        assert _same_params(again.params, trained.params)
        assert again.history == trained.history

    def test_thread_count_does_not_matter(self, split3, tiny_config):
        config = replace(tiny_config, batch_size=200)
        one = train(split3.train, config, split3.validation, workers=1)
        four = train(split3.train, config, split3.validation, workers=4)
        assert _same_params(one.params, four.params)
        assert one.history == four.history

    def test_loss_decreases(self, split3, tiny_config):
        config = replace(tiny_config, layer_cells=(8,), epochs=10, learning_rate=0.02)
        model = train(split3.train, config, split3.validation, workers=1)
        assert model.history[-1].train_loss < model.history[0].train_loss

    def test_converged_run_fits_training_windows(self, make_split, tiny_config):
        data = make_split(timesteps=1)
        config = replace(tiny_config, layer_cells=(8,), epochs=15, learning_rate=0.02,
                         timesteps=1)
        model = train(data.train, config, data.validation, workers=1)
        prediction = predict(model, data.train, workers=1)
        assert accuracy(data.train.labels, prediction.labels) >= 0.95

    def test_best_epoch_restored(self, split3, tiny_config):
        config = replace(tiny_config, epochs=4)
        model = train(split3.train, config, split3.validation, workers=1)
        best = min(model.history, key=lambda e: e.val_loss)
        assert model.best_epoch == best.epoch
        val_loss, val_acc = score(model.params, split3.validation)
        assert val_loss == pytest.approx(best.val_loss, abs=1e-9)
        assert val_acc == best.val_accuracy

    def test_train_accuracy_single_source(self, split3, tiny_config):
        config = replace(tiny_config, epochs=1)
        model = train(split3.train, config, split3.validation, workers=1)
        prediction = predict(model, split3.train, workers=1)
        recomputed = accuracy(split3.train.labels, prediction.labels)
        assert model.history[0].train_accuracy == recomputed

    def test_early_stopping(self, split3, tiny_config):
        config = replace(tiny_config, epochs=30, learning_rate=0.05, early_stop_patience=2)
        model = train(split3.train, config, split3.validation, workers=1)
        best = min(e.val_loss for e in model.history)
        assert model.history[model.best_epoch - 1].val_loss == best
        if len(model.history) < 30:
            assert len(model.history) == model.best_epoch + 2
            assert all(e.val_loss >= best for e in model.history[-2:])

    def test_without_early_stopping_runs_every_epoch(self, trained, tiny_config):
        assert tiny_config.early_stop_patience is None
        assert len(trained.history) == tiny_config.epochs

    def test_epoch_cleared_after_training(self, trained):
        assert current_context()["epoch"] is None

    def test_holdout_when_no_validation(self, split3, tiny_config, caplog):
        with caplog.at_level(logging.INFO, logger="lstm_ids.training.trainer"):
            model = train(split3.train, tiny_config, workers=1)
        assert "holding out" in caplog.text
        assert len(model.history) == 3

    def test_non_finite_loss_names_epoch_and_batch(self, split3, tiny_config):
        poisoned = split3.train.subset(np.arange(split3.train.num_samples))
        poisoned.tensor[5, 1, 0] = np.nan
        config = replace(tiny_config, batch_size=1000)
        with pytest.raises(TrainingError, match="epoch 1, batch 1") as excinfo:
            train(poisoned, config, split3.validation, workers=1)
        assert (excinfo.value.epoch, excinfo.value.batch) == (1, 1)

    def test_epoch_cleared_after_failed_training(self, split3, tiny_config):
        poisoned = split3.train.subset(np.arange(split3.train.num_samples))
        poisoned.tensor[0, 0, 0] = np.nan
        with pytest.raises(TrainingError):
            train(poisoned, tiny_config, split3.validation, workers=1)
        assert current_context()["epoch"] is None

    def test_timesteps_must_match(self, split3, tiny_config):
        with pytest.raises(ConfigError, match="3 timesteps"):
            train(split3.train, replace(tiny_config, timesteps=5), split3.validation)

    def test_invalid_config(self, split3, tiny_config):
        with pytest.raises(ConfigError, match="epochs"):
            train(split3.train, replace(tiny_config, epochs=0), split3.validation)

    def test_raw_windows_rejected(self, pair_schema, tiny_config, rng):
        raw = window(rng.normal(size=(20, 3)), np.zeros(20, dtype=int), 3, pair_schema)
        with pytest.raises(DataError, match="normalized"):
            train(raw, tiny_config)

    def test_validation_with_foreign_stats(self, make_split, tiny_config):
        ours, theirs = make_split(seed=3), make_split(seed=4)
        with pytest.raises(SchemaMismatchError, match="training statistics"):
            train(ours.train, tiny_config, theirs.validation, workers=1)

    def test_bidirectional(self, split3, tiny_config):
        config = replace(tiny_config, variant="bidirectional", layer_cells=(3,), epochs=2)
        model = train(split3.train, config, split3.validation, workers=1)
        assert model.params.bidirectional
        model.validate()


class TestPredict:

    def test_probabilities(self, trained, split3):
        prediction = predict(trained, split3.validation, workers=1)
        np.testing.assert_allclose(prediction.probabilities.sum(axis=1), 1.0, rtol=0, atol=1e-9)
        assert np.array_equal(prediction.probabilities.argmax(axis=1), prediction.labels)
        assert prediction.labels.shape == (split3.validation.num_samples,)

    def test_raw_array_normalized_with_model_stats(self, trained, split3):
        normalized = split3.validation.tensor[:4]
        raw = normalized * trained.stats.std + trained.stats.mean
        from_raw = predict(trained, raw, workers=1)
        from_set = predict(trained, split3.validation.subset(np.arange(4)), workers=1)
        np.testing.assert_allclose(from_raw.probabilities, from_set.probabilities,
                                   rtol=0, atol=1e-9)

    def test_single_window(self, trained, split3):
        raw = split3.validation.tensor[0] * trained.stats.std + trained.stats.mean
        assert predict(trained, raw, workers=1).labels.shape == (1,)

    def test_deterministic(self, trained, split3):
        a = predict(trained, split3.validation, workers=1)
        b = predict(trained, split3.validation, workers=3)
        assert np.array_equal(a.probabilities, b.probabilities)

    def test_wrong_window_shape(self, trained):
        with pytest.raises(ShapeError, match="model expects"):
            predict(trained, np.zeros((2, 5, 3)), workers=1)

    def test_other_stats_rejected(self, trained, split3):
        other = ColumnStats(trained.stats.columns, trained.stats.mean + 1.0,
                            trained.stats.std, trained.stats.n)
        foreign = replace(split3.validation, stats=other)
        with pytest.raises(SchemaMismatchError, match="statistics"):
            model_inputs(trained, foreign)

    def test_other_schema_rejected(self, trained, split3):
        schema = DatasetSchema.custom(["a", "b", "z"], "label", ["quiet", "noisy"])
        foreign = replace(split3.validation, schema=schema)
        with pytest.raises(SchemaMismatchError, match="schema"):
            predict(trained, foreign, workers=1)


class TestEvaluate:

    def test_report_and_timing(self, trained, split3):
        result = evaluate(trained, split3.validation, workers=1)
        assert result.report.total == split3.validation.num_samples
        assert result.report.accuracy == accuracy(split3.validation.labels,
                                                  result.prediction.labels)
        assert result.confusion.class_names == ("quiet", "noisy")
        assert result.seconds >= 0 and result.ms_per_sample >= 0
        assert result.report.extras["timing"]["samples"] == split3.validation.num_samples
