"""Confusion matrices, classification reports and their renderings."""

from __future__ import annotations

from lstm_ids.metrics.classification import (
    ClassificationReport,
    ClassMetrics,
    ConfusionMatrix,
    accuracy,
    confusion,
    report,
)
from lstm_ids.metrics.render import render_history, render_report

__all__ = [
    "ClassMetrics",
    "ClassificationReport",
    "ConfusionMatrix",
    "accuracy",
    "confusion",
    "render_history",
    "render_report",
    "report",
]
