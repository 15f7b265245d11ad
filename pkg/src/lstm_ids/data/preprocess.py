"""Flow preprocessing: numerize, z-score, stratified split, windowing.

Pipeline order (see :func:`preprocess`)::

    records → numerize → split → zscore_fit(train) → zscore_transform(both)
            → window(train), window(validation)

z-scores use the population standard deviation (divisor N):

    μ_m = Σ_i x_im / N        σ_m = √(Σ_i (x_im − μ_m)² / N)
    z_im = (x_im − μ_m) / σ_m, and 0 wherever σ_m = 0

Statistics are always fit on the training partition only.
"""

from __future__ import annotations

import ipaddress
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from lstm_ids.data.ingest import FlowRecord
from lstm_ids.data.schemas import DatasetSchema
from lstm_ids.exceptions import ConfigError, DataError, ShapeError

logger = logging.getLogger(__name__)

IPV4_SPACE = 2 ** 32
LOGGED_ROWS = 10


@dataclass(eq=False)
class FeatureMatrix:
    values: np.ndarray                  # N × M float64
    columns: Tuple[str, ...]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError(f"Feature matrix must be 2-D, got shape {self.values.shape}")
        if len(self.columns) != self.values.shape[1]:
            raise ShapeError(
                f"{len(self.columns)} column names for {self.values.shape[1]} columns")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def rows(self, index: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(self.values[index], self.columns)

    def stats(self) -> "ColumnStats":
        return zscore_fit(self)


@dataclass(eq=False)
class ColumnStats:
    columns: Tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    n: int

    def same_as(self, other: Optional["ColumnStats"]) -> bool:
        """Bitwise equality of the fitted statistics."""
        return (other is not None
                and tuple(self.columns) == tuple(other.columns)
                and self.n == other.n
                and np.array_equal(self.mean, other.mean)
                and np.array_equal(self.std, other.std))

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "n": int(self.n),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ColumnStats":
        return cls(
            columns=tuple(data["columns"]),
            mean=np.array(data["mean"], dtype=np.float64),
            std=np.array(data["std"], dtype=np.float64),
            n=int(data["n"]),
        )


# ── Numerize ─────────────────────────────────────────────────────────

def ipv4_value(text: str) -> float:
    """Dotted-quad IPv4 as its 32-bit unsigned value; NaN if not IPv4.

    A plain number already in the 32-bit range passes through, so numerize
    is idempotent on numeric data.
    """
    try:
        return float(int(ipaddress.IPv4Address(text.strip())))
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        return math.nan
    if 0 <= value < IPV4_SPACE and value == int(value):
        return value
    return math.nan


def _hex_value(text: str) -> float:
    try:
        return float(int(text, 16))
    except ValueError:
        return math.nan


def _numeric_column(text: pd.Series) -> pd.Series:
    out = pd.to_numeric(text, errors="coerce").astype(np.float64)
    hexadecimal = out.isna() & text.str.lower().str.startswith("0x")
    if hexadecimal.any():
        out[hexadecimal] = text[hexadecimal].map(_hex_value)
    return out


@dataclass(eq=False)
class NumerizeResult:
    matrix: FeatureMatrix
    labels: np.ndarray                  # int64, encoded by schema class order
    dropped_null: int = 0
    dropped_duplicate: int = 0
    rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def numerize(records: Sequence[FlowRecord], schema: DatasetSchema) -> NumerizeResult:
    """Convert feature strings to float64, dropping null and duplicate rows."""
    if not records:
        raise DataError("No flow records to numerize")
    features = list(schema.feature_columns)
    frame = pd.DataFrame([r.raw for r in records], columns=features)
    numeric = {}
    for column in features:
        text = frame[column].fillna("").astype(str).str.strip()
        if column in schema.ip_columns:
            numeric[column] = text.map(ipv4_value).astype(np.float64)
        else:
            numeric[column] = _numeric_column(text)
    values = pd.DataFrame(numeric, columns=features).to_numpy(dtype=np.float64)
    labels = np.array([schema.encode_label(r.label) for r in records], dtype=np.int64)
    rows = np.array([r.row for r in records], dtype=np.int64)

    null = ~np.isfinite(values).all(axis=1)
    if null.any():
        lines = ", ".join(str(r) for r in rows[null][:LOGGED_ROWS])
        logger.warning("Dropped %d rows with null or unparseable features "
                       "(lines %s%s)", int(null.sum()), lines,
                       ", ..." if null.sum() > LOGGED_ROWS else "")
    keep = ~null
    values, labels, rows = values[keep], labels[keep], rows[keep]

    keyed = pd.DataFrame(values)
    keyed["label"] = labels
    duplicate = keyed.duplicated(keep="first").to_numpy()
    if duplicate.any():
        logger.info("Dropped %d duplicate rows", int(duplicate.sum()))
    keep = ~duplicate
    values, labels, rows = values[keep], labels[keep], rows[keep]

    if values.shape[0] == 0:
        raise DataError(
            f"All {len(records)} rows were dropped as null or duplicate")
    return NumerizeResult(
        matrix=FeatureMatrix(values, tuple(features)),
        labels=labels,
        dropped_null=int(null.sum()),
        dropped_duplicate=int(duplicate.sum()),
        rows=rows,
    )


# ── z-score ──────────────────────────────────────────────────────────

def _values(x: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    return x.values if isinstance(x, FeatureMatrix) else np.asarray(x, dtype=np.float64)


def zscore_fit(x: Union[FeatureMatrix, np.ndarray]) -> ColumnStats:
    """Per-column mean and population standard deviation (two-pass)."""
    values = _values(x)
    if values.ndim != 2 or values.shape[0] < 1:
        raise DataError(f"Cannot fit z-score statistics on shape {values.shape}")
    mean = values.mean(axis=0)
    std = np.sqrt(((values - mean) ** 2).mean(axis=0))
    # Rounding in the mean leaves a tiny σ on constant columns; pin them.
    constant = np.ptp(values, axis=0) == 0
    mean[constant] = values[0, constant]
    std[constant] = 0.0
    columns = x.columns if isinstance(x, FeatureMatrix) else tuple(
        f"f{m}" for m in range(values.shape[1]))
    return ColumnStats(tuple(columns), mean, std, values.shape[0])


def normalize_array(values: np.ndarray, stats: ColumnStats) -> np.ndarray:
    """z-score any array whose last axis holds the stats' columns."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] != len(stats.mean):
        raise ShapeError(
            f"Data has {values.shape[-1]} columns, statistics cover {len(stats.mean)}")
    constant = stats.std == 0
    scale = np.where(constant, 1.0, stats.std)
    out = (values - stats.mean) / scale
    out[..., constant] = 0.0
    return out


def zscore_transform(x: FeatureMatrix, stats: ColumnStats) -> FeatureMatrix:
    return FeatureMatrix(normalize_array(x.values, stats), x.columns)


def zscore_inverse(x: FeatureMatrix, stats: ColumnStats) -> FeatureMatrix:
    """x·σ + μ; exact inverse of the transform on σ > 0 columns."""
    return FeatureMatrix(x.values * stats.std + stats.mean, x.columns)


# ── Split ────────────────────────────────────────────────────────────

@dataclass(eq=False)
class Partition:
    x: Union[FeatureMatrix, np.ndarray]
    labels: np.ndarray
    index: np.ndarray                   # rows of the input, ascending

    def __len__(self) -> int:
        return len(self.index)


def _take(x, index: np.ndarray):
    if isinstance(x, FeatureMatrix):
        return x.rows(index)
    return np.asarray(x)[index]


def split(x, labels, train_fraction: float, seed: int) -> Tuple[Partition, Partition]:
    """Stratified random split, rounding each class's share toward train.

    Each partition keeps the original row order. A class with fewer than
    two samples goes wholly to train.
    """
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    labels = np.asarray(labels)
    n_rows = x.n_rows if isinstance(x, FeatureMatrix) else len(x)
    if labels.shape[0] != n_rows:
        raise ShapeError(f"{labels.shape[0]} labels for {n_rows} rows")
    rng = np.random.default_rng(seed)
    train_parts: List[np.ndarray] = []
    val_parts: List[np.ndarray] = []
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        if len(members) < 2:
            logger.warning("Class %s has %d sample(s); assigning it wholly to train",
                           cls, len(members))
            train_parts.append(members)
            continue
        n_train = min(len(members), math.ceil(train_fraction * len(members) - 1e-9))
        train_parts.append(members[:n_train])
        val_parts.append(members[n_train:])
    empty = np.zeros(0, dtype=np.int64)
    train_index = np.sort(np.concatenate(train_parts)) if train_parts else empty
    val_index = np.sort(np.concatenate(val_parts)) if val_parts else empty
    return (Partition(_take(x, train_index), labels[train_index], train_index),
            Partition(_take(x, val_index), labels[val_index], val_index))


# ── Windowing ────────────────────────────────────────────────────────

@dataclass(eq=False)
class WindowedDataset:
    tensor: np.ndarray                  # samples × timesteps × features
    labels: np.ndarray                  # one int64 label per window
    timesteps: int
    schema: DatasetSchema
    stats: Optional[ColumnStats] = None     # None = not normalized

    def __post_init__(self) -> None:
        self.validate()

    @property
    def class_names(self) -> Tuple[str, ...]:
        return self.schema.class_names

    @property
    def num_samples(self) -> int:
        return self.tensor.shape[0]

    @property
    def num_features(self) -> int:
        return self.tensor.shape[2]

    def subset(self, index: np.ndarray) -> "WindowedDataset":
        return WindowedDataset(self.tensor[index], self.labels[index],
                               self.timesteps, self.schema, self.stats)

    def validate(self) -> None:
        if self.timesteps < 1:
            raise ShapeError(f"timesteps must be >= 1, got {self.timesteps}")
        if self.tensor.ndim != 3 or self.tensor.shape[1] != self.timesteps:
            raise ShapeError(
                f"Window tensor has shape {self.tensor.shape}, expected "
                f"(samples, {self.timesteps}, features)")
        if self.labels.shape != (self.tensor.shape[0],):
            raise ShapeError(
                f"{self.labels.shape[0]} labels for {self.tensor.shape[0]} windows")
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= self.schema.num_classes):
            raise DataError(
                f"Window labels fall outside the {self.schema.num_classes} "
                f"{self.schema.name} classes")


def window(x, labels, timesteps: int, schema: DatasetSchema,
           stats: Optional[ColumnStats] = None) -> WindowedDataset:
    """Stride-1 windows over row order; each takes its newest row's label.

    Window i covers rows [i, i+T) and is labeled like row i+T−1, giving
    N−T+1 windows.
    """
    values = _values(x)
    labels = np.asarray(labels, dtype=np.int64)
    if timesteps < 1:
        raise ConfigError(f"timesteps must be >= 1, got {timesteps}")
    if values.shape[0] < timesteps:
        raise DataError(
            f"Too few rows for windowing: {values.shape[0]} rows, timesteps {timesteps}")
    if labels.shape[0] != values.shape[0]:
        raise ShapeError(f"{labels.shape[0]} labels for {values.shape[0]} rows")
    views = np.lib.stride_tricks.sliding_window_view(values, timesteps, axis=0)
    tensor = np.ascontiguousarray(views.transpose(0, 2, 1))
    return WindowedDataset(tensor, labels[timesteps - 1:].copy(), timesteps,
                           schema, stats)


# ── Whole pipeline ───────────────────────────────────────────────────

@dataclass
class PreprocessSummary:
    rows_read: int
    dropped_null: int
    dropped_duplicate: int
    rows_kept: int
    class_counts: Dict[str, int]
    train_rows: int
    validation_rows: int
    train_windows: int
    validation_windows: int
    timesteps: int
    train_fraction: float
    seed: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(eq=False)
class PreprocessResult:
    train: WindowedDataset
    validation: WindowedDataset
    stats: ColumnStats
    summary: PreprocessSummary


def preprocess(records: Sequence[FlowRecord], schema: DatasetSchema,
               timesteps: int, train_fraction: float, seed: int) -> PreprocessResult:
    numerized = numerize(records, schema)
    train, validation = split(numerized.matrix, numerized.labels, train_fraction, seed)
    stats = zscore_fit(train.x)
    train_set = window(zscore_transform(train.x, stats), train.labels,
                       timesteps, schema, stats)
    validation_set = window(zscore_transform(validation.x, stats), validation.labels,
                            timesteps, schema, stats)
    counts = np.bincount(numerized.labels, minlength=schema.num_classes)
    summary = PreprocessSummary(
        rows_read=len(records),
        dropped_null=numerized.dropped_null,
        dropped_duplicate=numerized.dropped_duplicate,
        rows_kept=numerized.matrix.n_rows,
        class_counts={name: int(n) for name, n in zip(schema.class_names, counts)},
        train_rows=len(train),
        validation_rows=len(validation),
        train_windows=train_set.num_samples,
        validation_windows=validation_set.num_samples,
        timesteps=timesteps,
        train_fraction=train_fraction,
        seed=seed,
    )
    return PreprocessResult(train_set, validation_set, stats, summary)
