"""Structured logging with run-scoped context.

Every CLI invocation gets a short run id, held in a contextvar together
with the subcommand name and, inside the training loop, the current
epoch. A logging filter stamps each record with those fields. Two output
formats are selected by ``LBDMIDS_LOG_JSON``: unset/``0`` keeps a
human-readable line; ``1`` emits one JSON object per line.

Logs always go to stderr; stdout is reserved for command payloads.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from contextvars import ContextVar
from datetime import datetime, timezone
from typing import Optional
from uuid import uuid4

LOG_JSON_ENV = "LBDMIDS_LOG_JSON"
RUN_ID_LENGTH = 12
CONTEXT_FIELDS = ("run_id", "command", "epoch")

# One mutable dict per run. Trainer worker threads run inside a copied
# context (contextvars.copy_context) that still points at the same dict.
_context: ContextVar[Optional[dict]] = ContextVar("lstm_ids_context", default=None)

_HANDLER_FLAG = "_lstm_ids_observability"


def _state() -> dict:
    state = _context.get()
    if state is None:
        state = {}
        _context.set(state)
    return state


def new_context(run_id: Optional[str] = None, command: Optional[str] = None) -> str:
    """Start a fresh context for a CLI run; returns the run id."""
    run_id = run_id or uuid4().hex[:RUN_ID_LENGTH]
    state = {"run_id": run_id}
    if command:
        state["command"] = command
    _context.set(state)
    return run_id


def bind_context(*, run_id: Optional[str] = None, command: Optional[str] = None,
                 epoch: Optional[int] = None) -> None:
    """Attach fields to the current context; ``None`` leaves a field as is."""
    state = _state()
    if run_id is not None:
        state["run_id"] = run_id
    if command is not None:
        state["command"] = command
    if epoch is not None:
        state["epoch"] = epoch


def clear_epoch() -> None:
    _state().pop("epoch", None)


def current_context() -> dict:
    state = _context.get() or {}
    return {name: state.get(name) for name in CONTEXT_FIELDS}


class ContextFilter(logging.Filter):
    """Stamps every record with the current run-scoped fields."""

    def filter(self, record: logging.LogRecord) -> bool:
        state = _context.get() or {}
        for name in CONTEXT_FIELDS:
            setattr(record, name, state.get(name))
        return True


class JsonLogFormatter(logging.Formatter):
    """One JSON object per line; null context fields are omitted."""

    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "ts": datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        for name in CONTEXT_FIELDS:
            value = getattr(record, name, None)
            if value is not None:
                payload[name] = value
        if record.exc_info:
            payload["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(payload)


class TextLogFormatter(logging.Formatter):
    """Human line with the epoch appended when one is bound."""

    def __init__(self) -> None:
        super().__init__("%(asctime)s %(levelname)s %(name)s: %(message)s")

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        epoch = getattr(record, "epoch", None)
        return f"{line} [epoch {epoch}]" if epoch is not None else line


def _json_mode() -> bool:
    return os.environ.get(LOG_JSON_ENV, "0") == "1"


def level_for(verbosity: int) -> int:
    if verbosity >= 2:
        return logging.DEBUG
    if verbosity == 1:
        return logging.INFO
    return logging.WARNING


def setup_logging(verbosity: int = 0) -> None:
    """Install our stderr handler on the root logger. Idempotent: a handler
    installed by an earlier call is replaced, foreign handlers are kept."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, _HANDLER_FLAG, False):
            root.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    setattr(handler, _HANDLER_FLAG, True)
    handler.addFilter(ContextFilter())
    handler.setFormatter(JsonLogFormatter() if _json_mode() else TextLogFormatter())
    root.addHandler(handler)
    root.setLevel(level_for(verbosity))
