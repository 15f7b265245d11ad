"""Tests for model files: exact round trips and rejected damage."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from lstm_ids.config import ModelConfig
from lstm_ids.data.dataset_io import dataset_bytes
from lstm_ids.data.preprocess import ColumnStats
from lstm_ids.data.schemas import BOT_IOT, DatasetSchema
from lstm_ids.exceptions import (
    ChecksumError,
    DataError,
    ModelFormatError,
    TruncatedFileError,
    VersionMismatchError,
)
from lstm_ids.nn.lstm import init_params
from lstm_ids.training import load_model, predict, save_model, train
from lstm_ids.training.model_io import MODEL_FORMAT_VERSION, model_bytes, model_from_bytes
from lstm_ids.training.trainer import EpochStats, TrainedModel


def _random_model(rng, schema: DatasetSchema) -> TrainedModel:
    bidirectional = bool(rng.integers(0, 2))
    cells = (int(rng.integers(1, 6)),) if bidirectional else tuple(
        int(h) for h in rng.integers(1, 6, size=int(rng.integers(1, 4))))
    config = ModelConfig(variant="bidirectional" if bidirectional else "stacked",
                         layer_cells=cells, timesteps=int(rng.integers(1, 6)),
                         seed=int(rng.integers(0, 1000)))
    f = schema.num_features
    stats = ColumnStats(schema.feature_columns, rng.normal(size=f),
                        rng.uniform(0.5, 2.0, size=f), int(rng.integers(10, 100)))
    history = [EpochStats(1, 1.2, 0.4, 1.3, 0.35), EpochStats(2, 0.8, 0.6, 0.9, 0.55)]
    params = init_params(config, f, schema.num_classes)
    for array in params.arrays():
        array += rng.normal(scale=0.1, size=array.shape)
    return TrainedModel(params, config, stats, schema, history, best_epoch=2)


def _assert_same(a: TrainedModel, b: TrainedModel) -> None:
    assert all(np.array_equal(x, y) for x, y in zip(a.params.arrays(), b.params.arrays()))
    assert a.config == b.config
    assert a.schema == b.schema
    assert a.stats.same_as(b.stats)
    assert a.history == b.history
    assert a.best_epoch == b.best_epoch


@pytest.fixture()
def model(rng):
    return _random_model(rng, BOT_IOT)


class TestRoundTrip:

    def test_bitwise(self, model, tmp_path):
        path = tmp_path / "m.lbdm"
        save_model(model, path)
        _assert_same(load_model(path), model)

    def test_saving_twice_identical_bytes(self, model, tmp_path):
        save_model(model, tmp_path / "a.lbdm")
        save_model(model, tmp_path / "b.lbdm")
        assert (tmp_path / "a.lbdm").read_bytes() == (tmp_path / "b.lbdm").read_bytes()

    def test_random_models(self, pair_schema):
        rng = np.random.default_rng(2024)
        for _ in range(50):
            original = _random_model(rng, pair_schema)
            _assert_same(model_from_bytes(model_bytes(original)), original)

    def test_loaded_model_predicts_identically(self, make_split, tiny_config, tmp_path):
        data = make_split()
        trained = train(data.train, tiny_config, data.validation, workers=1)
        save_model(trained, tmp_path / "m.lbdm")
        loaded = load_model(tmp_path / "m.lbdm")
        a = predict(trained, data.validation, workers=1)
        b = predict(loaded, data.validation, workers=1)
        assert np.array_equal(a.probabilities, b.probabilities)


class TestDamage:

    def test_flipped_weight_byte(self, model):
        data = bytearray(model_bytes(model))
        data[-20] ^= 0x01
        with pytest.raises(ChecksumError):
            model_from_bytes(bytes(data))

    def test_future_version(self, model):
        data = bytearray(model_bytes(model))
        struct.pack_into("<H", data, 4, MODEL_FORMAT_VERSION + 1)
        with pytest.raises(VersionMismatchError, match="version 2.*version 1"):
            model_from_bytes(bytes(data))

    def test_truncated(self, model):
        data = model_bytes(model)
        for cut in (5, len(data) // 2, len(data) - 1):
            with pytest.raises(TruncatedFileError):
                model_from_bytes(data[:cut])

    def test_dataset_file_is_not_a_model(self, make_split):
        with pytest.raises(ModelFormatError, match="Not a model file"):
            model_from_bytes(dataset_bytes(make_split().train))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_model(tmp_path / "absent.lbdm")
