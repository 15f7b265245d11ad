"""Tests for the framed binary container and dataset files."""

from __future__ import annotations

import numpy as np
import pytest

from lstm_ids import container
from lstm_ids.data.dataset_io import (
    DATASET_MAGIC,
    dataset_bytes,
    dataset_from_bytes,
    load_dataset,
    save_dataset,
)
from lstm_ids.data.preprocess import window
from lstm_ids.exceptions import (
    ChecksumError,
    DataError,
    ModelFormatError,
    TruncatedFileError,
    VersionMismatchError,
)

MAGIC = b"TEST"


def _packed(rng):
    arrays = [rng.normal(size=(3, 4)), np.arange(5, dtype=np.int64)]
    return container.pack(MAGIC, 2, {"name": "x"}, arrays), arrays


class TestContainer:

    def test_unpack_restores_header_and_arrays(self, rng):
        data, arrays = _packed(rng)
        header, restored = container.unpack(data, MAGIC, 2)
        assert header == {"name": "x"}
        assert np.array_equal(restored[0], arrays[0])
        assert restored[1].dtype == np.int64
        assert restored[1].tolist() == [0, 1, 2, 3, 4]

    def test_deterministic(self, rng):
        arrays = [rng.normal(size=(2, 2))]
        a = container.pack(MAGIC, 1, {"b": 1, "a": 2}, arrays)
        b = container.pack(MAGIC, 1, {"a": 2, "b": 1}, arrays)
        assert a == b

    def test_every_single_byte_flip_detected(self, rng):
        data, _ = _packed(rng)
        for k in range(container.PREFIX.size, len(data)):
            corrupted = bytearray(data)
            corrupted[k] ^= 0x01
            with pytest.raises(ModelFormatError):
                container.unpack(bytes(corrupted), MAGIC, 2)

    def test_payload_flip_is_checksum_error(self, rng):
        data, _ = _packed(rng)
        corrupted = bytearray(data)
        corrupted[-20] ^= 0xFF
        with pytest.raises(ChecksumError):
            container.unpack(bytes(corrupted), MAGIC, 2)

    def test_future_version_names_both(self, rng):
        data, _ = _packed(rng)
        with pytest.raises(VersionMismatchError, match="version 2.*version 1") as excinfo:
            container.unpack(data, MAGIC, 1)
        assert (excinfo.value.found, excinfo.value.supported) == (2, 1)

    def test_wrong_magic(self, rng):
        data, _ = _packed(rng)
        with pytest.raises(ModelFormatError, match="magic"):
            container.unpack(data, b"LBDM", 2)

    @pytest.mark.parametrize("keep", [0, 5, 40, -9, -1])
    def test_truncation(self, rng, keep):
        data, _ = _packed(rng)
        with pytest.raises(TruncatedFileError):
            container.unpack(data[:keep], MAGIC, 2)


class TestDatasetFiles:

    def test_round_trip(self, tmp_path, make_split):
        dataset = make_split().train
        path = tmp_path / "train.lbds"
        save_dataset(dataset, path)
        loaded = load_dataset(path)
        assert np.array_equal(loaded.tensor, dataset.tensor)
        assert np.array_equal(loaded.labels, dataset.labels)
        assert loaded.schema == dataset.schema
        assert loaded.timesteps == dataset.timesteps
        assert loaded.stats.same_as(dataset.stats)

    def test_raw_windows_keep_null_stats(self, pair_schema, rng):
        raw = window(rng.normal(size=(6, 3)), np.zeros(6, dtype=int), 2, pair_schema)
        assert dataset_from_bytes(dataset_bytes(raw)).stats is None

    def test_magic(self, make_split):
        assert dataset_bytes(make_split().validation)[:4] == DATASET_MAGIC

    def test_model_file_is_not_a_dataset(self, make_split):
        data = bytearray(dataset_bytes(make_split().validation))
        data[:4] = b"LBDM"
        with pytest.raises(ModelFormatError, match="Not a dataset file"):
            dataset_from_bytes(bytes(data))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_dataset(tmp_path / "absent.lbds")

    def test_no_temp_files_left(self, tmp_path, make_split):
        save_dataset(make_split().validation, tmp_path / "v.lbds")
        assert [p.name for p in tmp_path.iterdir()] == ["v.lbds"]
