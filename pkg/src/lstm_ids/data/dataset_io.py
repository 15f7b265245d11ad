"""Preprocessed dataset files.

A dataset file is a :mod:`lstm_ids.container` with magic ``LBDS``. Its
header records the schema, timesteps and the ColumnStats that normalized
the windows (``null`` for raw windows); the payload is the window tensor
(float64) followed by the labels (int64).
"""

from __future__ import annotations

import logging
from pathlib import Path

from lstm_ids import container
from lstm_ids.data.preprocess import ColumnStats, WindowedDataset
from lstm_ids.data.schemas import DatasetSchema
from lstm_ids.exceptions import DataError, ModelFormatError
from lstm_ids.fileio import write_bytes

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"LBDS"
DATASET_FORMAT_VERSION = 1


def dataset_bytes(dataset: WindowedDataset) -> bytes:
    header = {
        "kind": "dataset",
        "schema": dataset.schema.to_dict(),
        "class_names": list(dataset.class_names),
        "timesteps": dataset.timesteps,
        "stats": dataset.stats.to_dict() if dataset.stats is not None else None,
    }
    return container.pack(DATASET_MAGIC, DATASET_FORMAT_VERSION, header,
                          [dataset.tensor, dataset.labels])


def save_dataset(dataset: WindowedDataset, path: Path | str) -> None:
    write_bytes(path, dataset_bytes(dataset))
    logger.info("Saved %d windows (T=%d) to %s",
                dataset.num_samples, dataset.timesteps, path)


def dataset_from_bytes(data: bytes) -> WindowedDataset:
    header, arrays = container.unpack(data, DATASET_MAGIC, DATASET_FORMAT_VERSION,
                                      kind="dataset")
    try:
        tensor, labels = arrays
        schema = DatasetSchema.from_dict(header["schema"])
        stats = header.get("stats")
        return WindowedDataset(
            tensor=tensor,
            labels=labels,
            timesteps=int(header["timesteps"]),
            schema=schema,
            stats=ColumnStats.from_dict(stats) if stats is not None else None,
        )
    except (KeyError, ValueError, TypeError) as e:
        raise ModelFormatError(f"dataset file header is malformed: {e}") from e


def load_dataset(path: Path | str) -> WindowedDataset:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise DataError(f"Dataset file not found: {path}") from None
    return dataset_from_bytes(data)
