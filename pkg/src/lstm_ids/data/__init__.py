"""Flow data: schemas, CSV ingestion, preprocessing, dataset files and
synthetic traffic."""

from __future__ import annotations

from lstm_ids.data.dataset_io import load_dataset, save_dataset
from lstm_ids.data.ingest import FlowRecord, ingest_csv, ingest_many
from lstm_ids.data.preprocess import (
    ColumnStats,
    FeatureMatrix,
    WindowedDataset,
    numerize,
    preprocess,
    split,
    window,
    zscore_fit,
    zscore_transform,
)
from lstm_ids.data.schemas import BOT_IOT, UNSW_NB15, DatasetSchema, get_schema

__all__ = [
    "BOT_IOT",
    "ColumnStats",
    "DatasetSchema",
    "FeatureMatrix",
    "FlowRecord",
    "UNSW_NB15",
    "WindowedDataset",
    "get_schema",
    "ingest_csv",
    "ingest_many",
    "load_dataset",
    "numerize",
    "preprocess",
    "save_dataset",
    "split",
    "window",
    "zscore_fit",
    "zscore_transform",
]
