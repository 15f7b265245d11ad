"""lstm-ids: LSTM flow classifiers for network intrusion detection."""

from __future__ import annotations

from lstm_ids.version import __version__
