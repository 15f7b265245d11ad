"""Training loop, prediction and evaluation.

Each epoch visits the training windows in a fresh seeded permutation, in
minibatches of ``config.batch_size``. A minibatch is cut into shards of
``SHARD_SIZE`` windows; shard forward and backward passes run on a
thread pool capped by ``$LBDMIDS_THREADS``, and shard gradients are summed
in shard order, so the result does not depend on the thread count. After
every epoch both partitions are scored in full with the end-of-epoch
parameters; those numbers form the history and drive early stopping.
"""

from __future__ import annotations

import contextvars
import logging
import math
import time
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from lstm_ids.config import DEFAULT_TRAIN_FRACTION, ModelConfig, worker_threads
from lstm_ids.data.preprocess import ColumnStats, WindowedDataset, normalize_array, split
from lstm_ids.data.schemas import DatasetSchema
from lstm_ids.exceptions import (
    ConfigError,
    DataError,
    SchemaMismatchError,
    ShapeError,
    TrainingError,
)
from lstm_ids.metrics import ClassificationReport, ConfusionMatrix, accuracy, confusion, report
from lstm_ids.nn.loss import softmax, sparse_cce
from lstm_ids.nn.lstm import LstmParams, ParamGrads, backward_sequence, forward_sequence, init_params
from lstm_ids.nn.optim import OptimizerState, adam_step, clip_by_global_norm
from lstm_ids.observability import bind_context, clear_epoch

logger = logging.getLogger(__name__)

SHARD_SIZE = 64
EVAL_CHUNK = 1024

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict) -> "EpochStats":
        return cls(int(data["epoch"]), float(data["train_loss"]),
                   float(data["train_accuracy"]), float(data["val_loss"]),
                   float(data["val_accuracy"]))


@dataclass(eq=False)
class TrainedModel:
    params: LstmParams
    config: ModelConfig
    stats: ColumnStats
    schema: DatasetSchema
    history: List[EpochStats] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def class_names(self) -> Tuple[str, ...]:
        return self.schema.class_names

    @property
    def schema_name(self) -> str:
        return self.schema.name

    def validate(self) -> None:
        self.params.validate()
        problems = self.config.validate()
        if problems:
            raise ConfigError(problems)
        if len(self.stats.mean) != self.schema.num_features:
            raise ShapeError(
                f"Stats cover {len(self.stats.mean)} columns, schema "
                f"{self.schema.name} has {self.schema.num_features} features")
        if self.params.input_width != self.schema.num_features:
            raise ShapeError(
                f"Model input width {self.params.input_width} does not match "
                f"{self.schema.num_features} schema features")
        if self.params.num_classes != self.schema.num_classes:
            raise ShapeError(
                f"Model has {self.params.num_classes} outputs for "
                f"{self.schema.num_classes} classes")
        hidden = [h for _, h in self.params.layer_shapes()]
        if hidden != list(self.config.layer_cells) or (
                self.params.bidirectional != self.config.bidirectional):
            raise ShapeError(
                f"Model layers {hidden} do not match config {list(self.config.layer_cells)} "
                f"({self.config.variant})")


# ── Worker fan-out ───────────────────────────────────────────────────

def _shards(n: int, size: int = SHARD_SIZE) -> List[slice]:
    return [slice(start, min(start + size, n)) for start in range(0, n, size)]


def _fan_out(pool: Optional[Executor], fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
    """``fn`` over ``items`` in order; on the pool when there is more than one."""
    if pool is None or len(items) < 2:
        return [fn(item) for item in items]
    futures = [pool.submit(contextvars.copy_context().run, fn, item) for item in items]
    return [f.result() for f in futures]


def _sum_grads(grads: List[ParamGrads]) -> ParamGrads:
    total = grads[0]
    for g in grads[1:]:
        for acc, part in zip(total.arrays(), g.arrays()):
            acc += part
    return total


def _batch_gradients(params: LstmParams, x: np.ndarray, y: np.ndarray,
                     pool: Optional[Executor]) -> Tuple[float, ParamGrads]:
    shards = _shards(x.shape[0])
    passes = _fan_out(pool, lambda s: forward_sequence(params, x[s]), shards)
    logits = np.concatenate([logit for logit, _ in passes], axis=0)
    loss, dlogits = sparse_cce(logits, y)
    if not math.isfinite(loss):
        return loss, params.zeros_like()
    grads = _fan_out(pool, lambda k: backward_sequence(params, passes[k][1], dlogits[shards[k]]),
                     list(range(len(shards))))
    return loss, _sum_grads(grads)


def _logits(params: LstmParams, tensor: np.ndarray,
            pool: Optional[Executor] = None) -> np.ndarray:
    if tensor.shape[0] == 0:
        return np.zeros((0, params.num_classes))
    chunks = _shards(tensor.shape[0], EVAL_CHUNK)
    parts = _fan_out(pool, lambda s: forward_sequence(params, tensor[s])[0], chunks)
    return np.concatenate(parts, axis=0)


def score(params: LstmParams, dataset: WindowedDataset,
          pool: Optional[Executor] = None) -> Tuple[float, float]:
    """(mean cross-entropy, accuracy) of ``params`` over every window."""
    logits = _logits(params, dataset.tensor, pool)
    loss, _ = sparse_cce(logits, dataset.labels)
    return loss, accuracy(dataset.labels, logits.argmax(axis=1))


# ── Training ─────────────────────────────────────────────────────────

def _check_compatible(train_set: WindowedDataset, validation: WindowedDataset) -> None:
    if validation.schema != train_set.schema:
        raise SchemaMismatchError(
            f"Validation windows use schema {validation.schema.name}, training "
            f"windows use {train_set.schema.name}")
    if validation.timesteps != train_set.timesteps:
        raise SchemaMismatchError(
            f"Validation windows have {validation.timesteps} timesteps, training "
            f"windows have {train_set.timesteps}")
    if train_set.stats is None or not train_set.stats.same_as(validation.stats):
        raise SchemaMismatchError(
            "Validation windows were not normalized with the training statistics")


def _holdout(dataset: WindowedDataset, seed: int) -> Tuple[WindowedDataset, WindowedDataset]:
    train, validation = split(np.arange(dataset.num_samples), dataset.labels,
                              DEFAULT_TRAIN_FRACTION, seed)
    logger.info("No validation set given; holding out %d of %d windows",
                len(validation), dataset.num_samples)
    return dataset.subset(train.index), dataset.subset(validation.index)


def train(dataset: WindowedDataset, config: ModelConfig,
          validation: Optional[WindowedDataset] = None,
          workers: Optional[int] = None) -> TrainedModel:
    """Minibatch Adam with early stopping; returns the best-validation-loss epoch."""
    config.ensure_valid()
    if dataset.num_samples == 0:
        raise DataError("No training windows")
    if dataset.stats is None:
        raise DataError("Training windows must be normalized (run preprocess first)")
    if dataset.timesteps != config.timesteps:
        raise ConfigError(
            f"Windows have {dataset.timesteps} timesteps but the config expects "
            f"{config.timesteps}")
    if validation is None:
        dataset, validation = _holdout(dataset, config.seed)
    if validation.num_samples == 0:
        raise DataError("No validation windows")
    _check_compatible(dataset, validation)

    params = init_params(config, dataset.num_features, dataset.schema.num_classes)
    state = OptimizerState.for_params(params, config.learning_rate)
    shuffle = np.random.default_rng([config.seed, 1])
    n = dataset.num_samples
    workers = workers or worker_threads()

    history: List[EpochStats] = []
    best_loss, best_params, best_epoch, stale = math.inf, params.copy(), 0, 0
    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            executor = pool if workers > 1 else None
            for epoch in range(1, config.epochs + 1):
                bind_context(epoch=epoch)
                order = shuffle.permutation(n)
                for batch, start in enumerate(range(0, n, config.batch_size), 1):
                    index = order[start:start + config.batch_size]
                    loss, grads = _batch_gradients(
                        params, dataset.tensor[index], dataset.labels[index], executor)
                    if not math.isfinite(loss):
                        raise TrainingError(
                            f"Loss became non-finite ({loss}) at epoch {epoch}, batch {batch}",
                            epoch=epoch, batch=batch)
                    norm = clip_by_global_norm(grads, config.clip_global_norm)
                    logger.debug("batch %d loss %.6f grad norm %.4g", batch, loss, norm)
                    adam_step(params, grads, state)

                train_loss, train_acc = score(params, dataset, executor)
                val_loss, val_acc = score(params, validation, executor)
                if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
                    raise TrainingError(
                        f"Epoch {epoch} ended with a non-finite loss "
                        f"(train {train_loss}, validation {val_loss})", epoch=epoch)
                history.append(EpochStats(epoch, train_loss, train_acc, val_loss, val_acc))
                logger.info("epoch %d/%d train loss %.4f acc %.4f, val loss %.4f acc %.4f",
                            epoch, config.epochs, train_loss, train_acc, val_loss, val_acc)

                if val_loss < best_loss:
                    best_loss, best_params, best_epoch, stale = val_loss, params.copy(), epoch, 0
                else:
                    stale += 1
                    patience = config.early_stop_patience
                    if patience is not None and stale >= patience:
                        logger.info("Validation loss has not improved for %d epochs; "
                                    "stopping after epoch %d", stale, epoch)
                        break
    finally:
        clear_epoch()
    logger.info("Best validation loss %.6f at epoch %d", best_loss, best_epoch)
    return TrainedModel(best_params, config, dataset.stats, dataset.schema,
                        history, best_epoch)


# ── Prediction and evaluation ────────────────────────────────────────

@dataclass(eq=False)
class Prediction:
    labels: np.ndarray                  # int64 per window
    probabilities: np.ndarray           # windows × classes, rows sum to 1


def _check_schema(model: TrainedModel, dataset: WindowedDataset) -> None:
    if dataset.schema.name != model.schema.name or (
            dataset.schema.feature_columns != model.schema.feature_columns):
        raise SchemaMismatchError(
            f"Model was trained on schema {model.schema.name}; the windows use "
            f"{dataset.schema.name}")
    if dataset.class_names != model.class_names:
        raise SchemaMismatchError(
            f"Model classes {list(model.class_names)} differ from dataset classes "
            f"{list(dataset.class_names)}")


def model_inputs(model: TrainedModel,
                 windows: Union[WindowedDataset, np.ndarray]) -> np.ndarray:
    """Windows ready for the network: normalized with the model's stats.

    A bare array, or a dataset without stats, is raw and gets normalized
    here; a dataset normalized with the model's stats passes through.
    """
    if isinstance(windows, WindowedDataset):
        _check_schema(model, windows)
        if windows.stats is not None and not model.stats.same_as(windows.stats):
            raise SchemaMismatchError(
                "Windows were normalized with statistics other than the model's")
        tensor, raw = windows.tensor, windows.stats is None
    else:
        tensor, raw = np.asarray(windows, dtype=np.float64), True
        if tensor.ndim == 2:
            tensor = tensor[np.newaxis]
    if tensor.ndim != 3:
        raise ShapeError(f"Windows must be rank 3, got shape {tensor.shape}")
    expected = (model.config.timesteps, model.schema.num_features)
    if tensor.shape[1:] != expected:
        raise ShapeError(
            f"Windows have shape {tensor.shape[1:]} (timesteps, features), the "
            f"model expects {expected}")
    return normalize_array(tensor, model.stats) if raw else tensor


def predict(model: TrainedModel, windows: Union[WindowedDataset, np.ndarray],
            workers: Optional[int] = None) -> Prediction:
    """Most probable class per window, with the full softmax distribution."""
    tensor = model_inputs(model, windows)
    workers = workers or worker_threads()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        logits = _logits(model.params, tensor, pool if workers > 1 else None)
    probabilities = softmax(logits)
    return Prediction(probabilities.argmax(axis=1).astype(np.int64), probabilities)


@dataclass(eq=False)
class Evaluation:
    report: ClassificationReport
    confusion: ConfusionMatrix
    prediction: Prediction
    seconds: float
    ms_per_sample: float


def evaluate(model: TrainedModel, dataset: WindowedDataset,
             workers: Optional[int] = None) -> Evaluation:
    """Predict every window, then score; times the prediction pass."""
    started = time.perf_counter()
    prediction = predict(model, dataset, workers)
    seconds = time.perf_counter() - started
    cm = confusion(dataset.labels, prediction.labels, model.schema.num_classes,
                   model.class_names)
    ms_per_sample = 1000.0 * seconds / max(dataset.num_samples, 1)
    timing = {"seconds": seconds, "ms_per_sample": ms_per_sample,
              "samples": dataset.num_samples}
    logger.info("Scored %d windows in %.3f s (%.4f ms/sample)",
                dataset.num_samples, seconds, ms_per_sample)
    return Evaluation(replace(report(cm), extras={"timing": timing}), cm, prediction,
                      seconds, ms_per_sample)
