"""Network core: numpy LSTM layers, exact BPTT, loss and optimizer.

Everything runs in float64 on plain numpy arrays; nothing here touches
files or configuration beyond :class:`~lstm_ids.config.ModelConfig`.
"""

from __future__ import annotations

from lstm_ids.nn.loss import softmax, sparse_cce
from lstm_ids.nn.lstm import (
    ForwardTrace,
    LstmCellParams,
    LstmParams,
    ParamGrads,
    backward_sequence,
    cell_step,
    forward_sequence,
    init_params,
)
from lstm_ids.nn.optim import OptimizerState, adam_step

__all__ = [
    "ForwardTrace",
    "LstmCellParams",
    "LstmParams",
    "OptimizerState",
    "ParamGrads",
    "adam_step",
    "backward_sequence",
    "cell_step",
    "forward_sequence",
    "init_params",
    "softmax",
    "sparse_cce",
]
