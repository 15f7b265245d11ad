"""Model files.

A model file is a :mod:`lstm_ids.container` with magic ``LBDM``. The JSON
header carries the config, schema, class names, ColumnStats, epoch
history and the layer layout; the weight arrays follow as little-endian
float64, row-major, in this traversal order:

    for each forward layer, then each backward layer (bidirectional only):
        W_i W_f W_g W_o   (hidden × input)
        U_i U_f U_g U_o   (hidden × hidden)
        b_i b_f b_g b_o   (hidden)
    dense_w (classes × final width), dense_b (classes)

Saving the same model twice gives byte-identical files.
"""

from __future__ import annotations

import logging
from pathlib import Path

from lstm_ids import container
from lstm_ids.config import ModelConfig
from lstm_ids.data.preprocess import ColumnStats
from lstm_ids.data.schemas import DatasetSchema
from lstm_ids.exceptions import DataError, LstmIdsError, ModelFormatError
from lstm_ids.fileio import write_bytes
from lstm_ids.nn.lstm import zero_params
from lstm_ids.training.trainer import EpochStats, TrainedModel

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"LBDM"
MODEL_FORMAT_VERSION = 1
TRAVERSAL_ORDER = (
    "forward layers then backward layers, each W_i W_f W_g W_o U_i U_f U_g U_o "
    "b_i b_f b_g b_o; then dense_w, dense_b"
)


def model_header(model: TrainedModel) -> dict:
    return {
        "kind": "model",
        "config": model.config.to_dict(),
        "schema": model.schema.to_dict(),
        "class_names": list(model.class_names),
        "feature_columns": list(model.schema.feature_columns),
        "stats": model.stats.to_dict(),
        "history": [e.to_dict() for e in model.history],
        "best_epoch": model.best_epoch,
        "layers": [list(shape) for shape in model.params.layer_shapes()],
        "bidirectional": model.params.bidirectional,
        "num_classes": model.params.num_classes,
        "traversal": TRAVERSAL_ORDER,
    }


def model_bytes(model: TrainedModel) -> bytes:
    model.validate()
    return container.pack(MODEL_MAGIC, MODEL_FORMAT_VERSION, model_header(model),
                          model.params.arrays())


def save_model(model: TrainedModel, path: Path | str) -> None:
    write_bytes(path, model_bytes(model))
    logger.info("Saved %s model (%s, layers %s) to %s", model.schema.name,
                model.config.variant, list(model.config.layer_cells), path)


def model_from_bytes(data: bytes) -> TrainedModel:
    header, arrays = container.unpack(data, MODEL_MAGIC, MODEL_FORMAT_VERSION)
    try:
        config = ModelConfig.from_dict(header["config"])
        schema = DatasetSchema.from_dict(header["schema"])
        skeleton = zero_params(config, len(header["feature_columns"]),
                               int(header["num_classes"]))
        model = TrainedModel(
            params=skeleton.from_arrays(arrays),
            config=config,
            stats=ColumnStats.from_dict(header["stats"]),
            schema=schema,
            history=[EpochStats.from_dict(e) for e in header["history"]],
            best_epoch=int(header["best_epoch"]),
        )
        model.validate()
    except (KeyError, ValueError, TypeError, LstmIdsError) as e:
        raise ModelFormatError(f"model file header is malformed: {e}") from e
    return model


def load_model(path: Path | str) -> TrainedModel:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise DataError(f"Model file not found: {path}") from None
    return model_from_bytes(data)
