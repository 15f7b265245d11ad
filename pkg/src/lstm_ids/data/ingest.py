"""Labeled flow-CSV ingestion.

Reads an RFC-4180 CSV (UTF-8, header row) with pandas, keeping every
value as its original string; conversion to numbers happens later in
:func:`lstm_ids.data.preprocess.numerize`. Rows without a label, or with a
label the schema does not know, are rejected with a diagnostic that
carries the file line number. Everything else is kept in file order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from lstm_ids.data.schemas import DatasetSchema
from lstm_ids.exceptions import DataError, MissingColumnError

logger = logging.getLogger(__name__)

# Header is line 1, so data row k (0-based) sits on line k + 2.
FIRST_DATA_LINE = 2
LOGGED_DIAGNOSTICS = 20


@dataclass(frozen=True)
class FlowRecord:
    """One labeled flow: raw feature strings keyed by schema column."""
    raw: Dict[str, str]
    label: str
    row: int = field(default=0, compare=False)


@dataclass(frozen=True)
class RowDiagnostic:
    path: str
    row: int
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.row}: {self.message}"


def read_frame(path: Path | str) -> pd.DataFrame:
    """Load a CSV with every cell as a string (no NA inference)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Flow CSV not found: {path}")
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False,
                           na_filter=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DataError(f"Flow CSV {path} is empty (no header row)") from None
    except (OSError, UnicodeDecodeError, pd.errors.ParserError) as e:
        raise DataError(f"Cannot read flow CSV {path}: {e}") from e


def ingest_csv(path: Path | str, schema: DatasetSchema,
               diagnostics: Optional[List[RowDiagnostic]] = None) -> List[FlowRecord]:
    """One FlowRecord per accepted data row, in file order.

    Rejected rows are reported through ``diagnostics`` (when given) and
    the log.
    """
    frame = read_frame(path)
    resolved = schema.resolve_header(frame.columns)
    for column in schema.required_columns:
        if resolved[column] is None:
            raise MissingColumnError(column, str(path))

    features = schema.feature_columns
    columns = [resolved[c] for c in schema.required_columns]
    rejected: List[RowDiagnostic] = []
    records: List[FlowRecord] = []
    for k, values in enumerate(frame[columns].itertuples(index=False, name=None)):
        line = k + FIRST_DATA_LINE
        raw_label = values[-1].strip()
        if not raw_label:
            rejected.append(RowDiagnostic(str(path), line, "missing label"))
            continue
        label = schema.canonical_label(raw_label)
        if label is None:
            rejected.append(RowDiagnostic(
                str(path), line, f"unknown {schema.name} class {raw_label!r}"))
            continue
        records.append(FlowRecord(dict(zip(features, values[:-1])), label, line))

    for diagnostic in rejected[:LOGGED_DIAGNOSTICS]:
        logger.warning("Rejected row %s", diagnostic)
    if len(rejected) > LOGGED_DIAGNOSTICS:
        logger.warning("... and %d more rejected rows in %s",
                       len(rejected) - LOGGED_DIAGNOSTICS, path)
    if diagnostics is not None:
        diagnostics.extend(rejected)
    logger.info("Ingested %d records from %s (%d rejected)",
                len(records), path, len(rejected))
    return records


def ingest_many(paths: Sequence[Path | str], schema: DatasetSchema,
                workers: int = 1,
                diagnostics: Optional[List[RowDiagnostic]] = None) -> List[FlowRecord]:
    """Ingest several files concurrently; records come back in file order."""
    per_file: List[List[RowDiagnostic]] = [[] for _ in paths]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        batches = list(pool.map(
            lambda job: ingest_csv(job[0], schema, job[1]),
            zip(paths, per_file)))
    if diagnostics is not None:
        for found in per_file:
            diagnostics.extend(found)
    return [record for batch in batches for record in batch]
