"""Dataset schemas: which CSV columns are features, which is the label.

Two schemas are built in: the 13 flow features of UNSW-NB15 with its ten
traffic classes, and the 10 pre-selected Bot-IoT features with its five
categories. A ``custom`` schema can be assembled for any other labeled
flow CSV.

Header matching is case-insensitive and ignores surrounding whitespace;
aliases cover the spellings the public CSVs actually use (``stddev`` for
``std_dev``, ``Backdoors`` for ``Backdoor``). The order of
``class_names`` defines the integer label encoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

from lstm_ids.exceptions import ConfigError, DataError

SCHEMA_NAMES = ("unsw_nb15", "bot_iot", "custom")


def _key(text: str) -> str:
    return text.strip().lower()


@dataclass(frozen=True)
class DatasetSchema:
    name: str
    feature_columns: Tuple[str, ...]
    label_column: str
    class_names: Tuple[str, ...]
    ip_columns: Tuple[str, ...] = ()
    column_aliases: Tuple[Tuple[str, str], ...] = ()   # (alias, canonical)
    label_aliases: Tuple[Tuple[str, str], ...] = ()    # (alias, class name)

    @property
    def num_features(self) -> int:
        return len(self.feature_columns)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def required_columns(self) -> Tuple[str, ...]:
        return self.feature_columns + (self.label_column,)

    def resolve_header(self, header: Iterable[str]) -> Dict[str, Optional[str]]:
        """Map each required column to its spelling in ``header`` (None if absent)."""
        by_key = {}
        for actual in header:
            by_key.setdefault(_key(actual), actual)
        aliases: Dict[str, list] = {}
        for alias, canonical in self.column_aliases:
            aliases.setdefault(_key(canonical), []).append(_key(alias))
        resolved = {}
        for column in self.required_columns:
            candidates = [_key(column)] + aliases.get(_key(column), [])
            resolved[column] = next(
                (by_key[c] for c in candidates if c in by_key), None)
        return resolved

    def canonical_label(self, raw: str) -> Optional[str]:
        """The class name ``raw`` denotes, or None when it names no class."""
        wanted = _key(raw)
        for name in self.class_names:
            if _key(name) == wanted:
                return name
        for alias, name in self.label_aliases:
            if _key(alias) == wanted:
                return name
        return None

    def encode_label(self, name: str) -> int:
        canonical = self.canonical_label(name)
        if canonical is None:
            raise DataError(
                f"Label {name!r} is not a {self.name} class "
                f"({', '.join(self.class_names)})")
        return self.class_names.index(canonical)

    def decode_label(self, index: int) -> str:
        if not 0 <= index < self.num_classes:
            raise DataError(
                f"Label index {index} is outside [0, {self.num_classes}) for {self.name}")
        return self.class_names[index]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "feature_columns": list(self.feature_columns),
            "label_column": self.label_column,
            "class_names": list(self.class_names),
            "ip_columns": list(self.ip_columns),
        }

    @classmethod
    def custom(cls, feature_columns: Sequence[str], label_column: str,
               class_names: Sequence[str],
               ip_columns: Sequence[str] = ()) -> "DatasetSchema":
        problems = []
        if not feature_columns:
            problems.append("a custom schema needs at least one feature column")
        if len(set(map(_key, feature_columns))) != len(feature_columns):
            problems.append("custom feature columns must be distinct")
        if not label_column.strip():
            problems.append("a custom schema needs a label column")
        if not class_names:
            problems.append("a custom schema needs at least one class")
        unknown_ips = [c for c in ip_columns if c not in feature_columns]
        if unknown_ips:
            problems.append(
                f"IP columns {unknown_ips} are not among the feature columns")
        if problems:
            raise ConfigError(problems)
        return cls(
            name="custom",
            feature_columns=tuple(c.strip() for c in feature_columns),
            label_column=label_column.strip(),
            class_names=tuple(c.strip() for c in class_names),
            ip_columns=tuple(ip_columns),
        )

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSchema":
        name = data.get("name", "custom")
        if name in SCHEMAS:
            return SCHEMAS[name]
        return cls.custom(data["feature_columns"], data["label_column"],
                          data["class_names"], data.get("ip_columns", ()))


UNSW_NB15 = DatasetSchema(
    name="unsw_nb15",
    feature_columns=(
        "srcip", "sport", "dstip", "dsport", "dur", "sbytes", "dbytes",
        "sttl", "dttl", "sload", "dload", "spkts", "dpkts",
    ),
    label_column="attack_cat",
    class_names=(
        "Normal", "Exploits", "Reconnaissance", "DoS", "Generic",
        "Shellcode", "Fuzzers", "Worms", "Backdoor", "Analysis",
    ),
    ip_columns=("srcip", "dstip"),
    column_aliases=(("dport", "dsport"),),
    label_aliases=(("Backdoors", "Backdoor"),),
)

BOT_IOT = DatasetSchema(
    name="bot_iot",
    feature_columns=(
        "rate", "srate", "drate", "min", "max", "mean", "std_dev",
        "state_number", "flgs_number", "seq",
    ),
    label_column="category",
    class_names=("Normal", "DDoS", "DoS", "Reconnaissance", "Theft"),
    column_aliases=(("stddev", "std_dev"),),
)

SCHEMAS: dict = {s.name: s for s in (UNSW_NB15, BOT_IOT)}


def get_schema(name: str) -> DatasetSchema:
    """Look up a built-in schema by name."""
    try:
        return SCHEMAS[name]
    except KeyError:
        raise ConfigError(
            f"Unknown schema: {name!r}. Built-in schemas: {', '.join(sorted(SCHEMAS))} "
            "(use a custom schema for anything else)"
        ) from None
