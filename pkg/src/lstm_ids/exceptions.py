"""Custom exception hierarchy for lstm_ids."""

from __future__ import annotations

from typing import Iterable, Optional


class LstmIdsError(Exception):
    """Base exception for all lstm_ids errors."""


class ConfigError(LstmIdsError):
    """Invalid model or run configuration.

    ``violations`` lists every problem found, so one error reports them all.
    """

    def __init__(self, violations: Iterable[str] | str) -> None:
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ShapeError(LstmIdsError):
    """Operand shapes do not agree."""


class DataError(LstmIdsError):
    """Input data could not be read or yields nothing usable."""


class MissingColumnError(DataError):
    """A schema column is absent from a CSV header."""

    def __init__(self, column: str, path: str = "") -> None:
        self.column = column
        where = f" in {path}" if path else ""
        super().__init__(f"Missing required column {column!r}{where}")


class SchemaMismatchError(DataError):
    """A model and a dataset disagree on schema, classes or normalization."""


class TrainingError(LstmIdsError):
    """Training cannot continue (e.g. the loss went non-finite)."""

    def __init__(self, message: str, *, epoch: Optional[int] = None,
                 batch: Optional[int] = None) -> None:
        self.epoch = epoch
        self.batch = batch
        super().__init__(message)


class ModelFormatError(LstmIdsError):
    """A model or dataset file is malformed."""


class ChecksumError(ModelFormatError):
    """Stored checksum does not match the file contents."""


class VersionMismatchError(ModelFormatError):
    """File format version is not the one this build reads."""

    def __init__(self, found: int, supported: int) -> None:
        self.found = found
        self.supported = supported
        super().__init__(
            f"Unsupported format version {found}; this build reads version "
            f"{supported}")


class TruncatedFileError(ModelFormatError):
    """File ends before its declared layout does."""
