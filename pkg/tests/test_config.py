"""Tests for ModelConfig validation, presets, run-config files and settings."""

from __future__ import annotations

import os

import pytest

from lstm_ids.config import (
    PRESETS,
    ModelConfig,
    config_from_preset,
    get_preset,
    load_run_config,
    preset_config,
    worker_threads,
)
from lstm_ids.exceptions import ConfigError


class TestModelConfig:

    def test_defaults_valid(self):
        config = ModelConfig()
        assert config.validate() == []
        assert (config.batch_size, config.timesteps, config.early_stop_patience) == (256, 10, 5)

    def test_zero_epochs_rejected(self):
        with pytest.raises(ConfigError, match="epochs must be >= 1"):
            ModelConfig(epochs=0).ensure_valid()

    def test_all_violations_reported(self):
        config = ModelConfig(variant="gru", layer_cells=(), epochs=0, learning_rate=0.0,
                             timesteps=0, batch_size=0, clip_global_norm=-1.0,
                             early_stop_patience=0)
        assert len(config.validate()) == 8

    def test_bidirectional_depth_one(self):
        problems = ModelConfig(variant="bidirectional", layer_cells=(8, 8)).validate()
        assert problems == ["bidirectional models take exactly one layer, got 2"]

    def test_stacked_any_depth(self):
        assert ModelConfig(layer_cells=(4, 4, 4, 4, 4)).validate() == []

    def test_overrides_skip_none(self):
        config = ModelConfig().with_overrides(epochs=9, learning_rate=None, layer_cells=[3, 4])
        assert config.epochs == 9
        assert config.learning_rate == ModelConfig().learning_rate
        assert config.layer_cells == (3, 4)

    def test_unknown_override(self):
        with pytest.raises(ConfigError, match="dropout"):
            ModelConfig().with_overrides(dropout=0.5)

    def test_wrong_types_are_violations(self):
        config = ModelConfig().with_overrides(epochs="five", learning_rate="fast",
                                              layer_cells=[8, "4"], early_stop_patience=2.5)
        assert config.validate() == [
            "layer_cells must be a list of integers, got (8, '4')",
            "epochs must be an integer, got 'five'",
            "learning_rate must be a number, got 'fast'",
            "early_stop_patience must be an integer, got 2.5",
        ]
        with pytest.raises(ConfigError, match="epochs must be an integer"):
            config.ensure_valid()

    def test_bool_is_not_an_integer(self):
        assert ModelConfig(batch_size=True).validate() == [
            "batch_size must be an integer, got True"]

    def test_layer_cells_not_a_list(self):
        problems = ModelConfig.from_dict({"layer_cells": 32}).validate()
        assert problems == ["layer_cells must be a list of integers, got 32"]

    def test_negative_seed(self):
        assert ModelConfig(seed=-1).validate() == ["seed must be >= 0, got -1"]

    def test_dict_round_trip(self):
        config = ModelConfig(variant="bidirectional", layer_cells=(12,), clip_global_norm=5.0,
                             early_stop_patience=None)
        assert ModelConfig.from_dict(config.to_dict()) == config


class TestPresets:

    @pytest.mark.parametrize("dataset,variant,cells,epochs,lr", [
        ("unsw_nb15", "stacked", (40, 128, 128, 64), 50, 0.002),
        ("bot_iot", "stacked", (32, 32), 5, 0.002),
        ("unsw_nb15", "bidirectional", (64,), 50, 0.0015),
        ("bot_iot", "bidirectional", (12,), 5, 0.001),
    ])
    def test_published_hyperparameters(self, dataset, variant, cells, epochs, lr):
        config = preset_config(dataset, variant)
        assert (config.variant, config.layer_cells, config.epochs, config.learning_rate) == (
            variant, cells, epochs, lr)
        assert (config.batch_size, config.timesteps) == (256, 10)
        assert config.validate() == []

    def test_cli_keys(self):
        assert sorted(PRESETS) == ["botiot-bilstm", "botiot-stacked", "unsw-bilstm", "unsw-stacked"]
        assert config_from_preset(get_preset("unsw-bilstm")) == preset_config(
            "unsw_nb15", "bidirectional")

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="Valid presets: botiot-bilstm"):
            get_preset("kdd-stacked")

    def test_unknown_dataset(self):
        with pytest.raises(ConfigError, match="No preset"):
            preset_config("kdd99", "stacked")


class TestRunConfig:

    def test_model_table(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('[model]\nepochs = 7\nlayer_cells = [16, 8]\n', encoding="utf-8")
        assert load_run_config(path) == {"epochs": 7, "layer_cells": [16, 8]}

    def test_no_model_table(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('title = "x"\n', encoding="utf-8")
        assert load_run_config(path) == {}

    def test_unknown_keys_all_listed(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[model]\ndropout = 0.1\nmomentum = 0.9\n", encoding="utf-8")
        with pytest.raises(ConfigError) as excinfo:
            load_run_config(path)
        assert len(excinfo.value.violations) == 2

    def test_missing(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_run_config(tmp_path / "absent.toml")

    def test_invalid(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[model\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="Invalid run config"):
            load_run_config(path)


class TestWorkerThreads:

    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("LBDMIDS_THREADS", "3")
        assert worker_threads() == 3

    def test_default_all_cpus(self, monkeypatch):
        monkeypatch.delenv("LBDMIDS_THREADS", raising=False)
        assert worker_threads() == (os.cpu_count() or 1)

    @pytest.mark.parametrize("value", ["zero", "0", "-2"])
    def test_invalid(self, monkeypatch, value):
        monkeypatch.setenv("LBDMIDS_THREADS", value)
        with pytest.raises(ConfigError, match="LBDMIDS_THREADS"):
            worker_threads()
