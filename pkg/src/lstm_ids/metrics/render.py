"""Report and history rendering.

``table`` is the human report (Jinja2 template, rates to two decimals,
"Weighted avg" as the last row); ``csv`` and ``json`` are machine formats
carrying full float precision.
"""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Iterable

import pandas as pd
from jinja2 import Environment, FileSystemLoader

from lstm_ids.exceptions import ConfigError
from lstm_ids.metrics.classification import ClassificationReport

TEMPLATE_DIR = Path(__file__).resolve().parent / "templates"
FORMATS = ("table", "csv", "json")
FORMAT_ALIASES = {"structured-text": "json"}
COLUMN_WIDTH = 10
REPORT_COLUMNS = ("class", "precision", "recall", "f1", "support")
HISTORY_COLUMNS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


def rate(value: float) -> str:
    return f"{value:.2f}"


def col(value, width: int = COLUMN_WIDTH) -> str:
    return str(value).rjust(width)


def name_col(value, width: int) -> str:
    return str(value).ljust(width)


def setup_jinja_env() -> Environment:
    env = Environment(
        loader=FileSystemLoader(str(TEMPLATE_DIR)),
        autoescape=False,
        trim_blocks=True,
        lstrip_blocks=True,
    )
    env.filters["rate"] = rate
    env.filters["col"] = col
    env.filters["name_col"] = name_col
    return env


def _frame_to_csv(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def render_table(report: ClassificationReport) -> str:
    width = max([len("Weighted avg")] + [len(m.name) for m in report.classes]) + 2
    template = setup_jinja_env().get_template("report_table.txt.j2")
    return template.render(report=report, width=width,
                           timing=report.extras.get("timing"))


def render_csv(report: ClassificationReport) -> str:
    """Per-class rows, then ``accuracy`` (in the f1 column) and ``weighted_avg``."""
    rows = [[m.name, m.precision, m.recall, m.f1, m.support] for m in report.classes]
    rows.append(["accuracy", None, None, report.accuracy, report.total])
    rows.append(["weighted_avg", report.weighted_precision, report.weighted_recall,
                 report.weighted_f1, report.total])
    return _frame_to_csv(pd.DataFrame(rows, columns=list(REPORT_COLUMNS)))


def render_json(report: ClassificationReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def resolve_format(fmt: str) -> str:
    fmt = FORMAT_ALIASES.get(fmt, fmt)
    if fmt not in FORMATS:
        raise ConfigError(
            f"Unknown report format {fmt!r}. Formats: {', '.join(FORMATS)}")
    return fmt


def render_report(report: ClassificationReport, fmt: str = "table") -> str:
    renderers = {"table": render_table, "csv": render_csv, "json": render_json}
    return renderers[resolve_format(fmt)](report)


def render_history(entries: Iterable) -> str:
    """Epoch-history CSV: one row per completed epoch."""
    rows = [[e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy]
            for e in entries]
    return _frame_to_csv(pd.DataFrame(rows, columns=list(HISTORY_COLUMNS)))
