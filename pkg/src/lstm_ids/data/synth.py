"""Synthetic labeled flow traffic in either schema's CSV layout.

Each class runs its own AR(1) chain per feature,

    x_t = μ + ρ·(x_{t−1} − μ) + s·√(1−ρ²)·ε,   ε ~ N(0, 1)

started from its stationary distribution N(μ, s²), so a class's rows are
correlated in time and windowing has something to find. Classes are
emitted in bursts of geometric length (mean ``mean_burst``); the class of
each burst is drawn in proportion to the rows it still owes, and its
chain resumes where its previous burst stopped.

Profiles are TOML files. Resolution order: explicit path →
$LBDMIDS_PROFILE → the bundled profile for the schema.
"""

from __future__ import annotations

import ipaddress
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np
import pandas as pd

from lstm_ids.data.ingest import FlowRecord
from lstm_ids.data.schemas import DatasetSchema
from lstm_ids.exceptions import ConfigError
from lstm_ids.fileio import atomic_write

logger = logging.getLogger(__name__)

BUNDLED_PROFILES = Path(__file__).resolve().parents[1] / "profiles"
PROFILE_ENV = "LBDMIDS_PROFILE"
FEATURE_KINDS = ("real", "integer", "ipv4")
DEFAULT_MEAN_BURST = 20
IPV4_MAX = 2 ** 32 - 1


@dataclass(frozen=True)
class FeatureProfile:
    mean: float
    spread: float = 1.0
    rho: float = 0.0
    kind: str = "real"

    def problems(self, where: str) -> List[str]:
        found = []
        if not self.spread >= 0:
            found.append(f"{where}: spread must be >= 0, got {self.spread}")
        if not -1 < self.rho < 1:
            found.append(f"{where}: rho must lie in (-1, 1), got {self.rho}")
        if self.kind not in FEATURE_KINDS:
            found.append(f"{where}: kind must be one of {', '.join(FEATURE_KINDS)}, "
                         f"got {self.kind!r}")
        return found


@dataclass(frozen=True)
class ClassProfile:
    class_name: str
    features: Mapping[str, FeatureProfile]

    @classmethod
    def build(cls, class_name: str, means: Mapping[str, float], spread: float = 1.0,
              rho: float = 0.0, kinds: Optional[Mapping[str, str]] = None) -> "ClassProfile":
        kinds = kinds or {}
        return cls(class_name, {
            name: FeatureProfile(float(mean), spread, rho, kinds.get(name, "real"))
            for name, mean in means.items()
        })

    def problems(self, schema: DatasetSchema) -> List[str]:
        found = []
        missing = [c for c in schema.feature_columns if c not in self.features]
        if missing:
            found.append(f"profile for {self.class_name} is missing features: "
                         f"{', '.join(missing)}")
        extra = [c for c in self.features if c not in schema.feature_columns]
        if extra:
            found.append(f"profile for {self.class_name} names unknown features: "
                         f"{', '.join(extra)}")
        for name, feature in self.features.items():
            found.extend(feature.problems(f"{self.class_name}.{name}"))
        return found


@dataclass(frozen=True)
class ProfileSet:
    schema_name: str
    classes: Mapping[str, ClassProfile]
    source_path: str = field(default="", compare=False)

    def validate(self, schema: DatasetSchema) -> None:
        problems = []
        for name, profile in self.classes.items():
            if schema.canonical_label(name) != name:
                problems.append(f"profile class {name!r} is not a {schema.name} class")
            problems.extend(profile.problems(schema))
        if problems:
            raise ConfigError(problems)


# ── Profile files ────────────────────────────────────────────────────

def _mean_value(raw, kind: str, where: str) -> float:
    if kind == "ipv4" and isinstance(raw, str):
        try:
            return float(int(ipaddress.IPv4Address(raw)))
        except ValueError:
            raise ConfigError(f"{where}: {raw!r} is not an IPv4 address") from None
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{where}: mean must be a number, got {raw!r}")
    return float(raw)


def profiles_from_dict(data: dict, schema: DatasetSchema,
                       source: str = "") -> ProfileSet:
    """Build a ProfileSet from a parsed profile TOML document.

    Per feature, spread comes from the class's ``spreads`` table, then the
    file's ``spreads`` table, then the file-wide ``spread``; rho from the
    class's ``rhos`` table, then the class ``rho``, then the file ``rho``.
    """
    declared = data.get("schema", schema.name)
    if declared != schema.name:
        raise ConfigError(
            f"Profile {source or '<dict>'} is for schema {declared!r}, not {schema.name!r}")
    kinds = data.get("kinds", {})
    spreads = data.get("spreads", {})
    spread = data.get("spread", 1.0)
    rho = data.get("rho", 0.0)
    tables = data.get("classes", {})
    if not tables:
        raise ConfigError(f"Profile {source or '<dict>'} defines no [classes]")

    classes = {}
    for class_name, table in tables.items():
        means = table.get("means")
        if not isinstance(means, dict):
            raise ConfigError(f"Profile class {class_name} is missing [classes.{class_name}.means]")
        class_spreads = table.get("spreads", {})
        class_rhos = table.get("rhos", {})
        class_rho = table.get("rho", rho)
        features = {}
        for name, raw in means.items():
            kind = kinds.get(name, "real")
            features[name] = FeatureProfile(
                mean=_mean_value(raw, kind, f"{class_name}.{name}"),
                spread=float(class_spreads.get(name, spreads.get(name, spread))),
                rho=float(class_rhos.get(name, class_rho)),
                kind=kind,
            )
        classes[class_name] = ClassProfile(class_name, features)
    profiles = ProfileSet(schema.name, classes, source)
    profiles.validate(schema)
    return profiles


def load_profiles(path: Path | str | None, schema: DatasetSchema) -> ProfileSet:
    """Load a class-profile TOML for ``schema``.

    Args:
        path: Explicit profile path. When None, uses $LBDMIDS_PROFILE if
            set, else the bundled profile for the schema.
    """
    if path is None:
        path = os.environ.get(PROFILE_ENV) or BUNDLED_PROFILES / f"{schema.name}.toml"
    path = Path(path)

    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Traffic profile not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Invalid traffic profile {path}: {e}") from e
    return profiles_from_dict(data, schema, str(path))


# ── Generation ───────────────────────────────────────────────────────

def _check_counts(schema: DatasetSchema, profiles: ProfileSet,
                  counts: Mapping[str, int]) -> Dict[str, int]:
    problems = []
    resolved = {}
    for raw_name, n in counts.items():
        name = schema.canonical_label(raw_name)
        if name is None:
            problems.append(f"unknown {schema.name} class {raw_name!r} in counts")
            continue
        if isinstance(n, bool) or not isinstance(n, int) or n < 0:
            problems.append(f"count for {name} must be a non-negative integer, got {n!r}")
            continue
        if n > 0 and name not in profiles.classes:
            problems.append(f"no traffic profile for class {name}")
            continue
        resolved[name] = resolved.get(name, 0) + n
    if problems:
        raise ConfigError(problems)
    # Schema class order keeps the draw sequence independent of dict order.
    return {name: resolved[name] for name in schema.class_names
            if resolved.get(name, 0) > 0}


def _format(value: float, kind: str) -> str:
    if kind == "ipv4":
        return str(ipaddress.IPv4Address(int(min(max(round(value), 0), IPV4_MAX))))
    if kind == "integer":
        return str(int(round(value)))
    return f"{value:.6f}"


class _Chain:
    """Per-class AR(1) state across bursts."""

    def __init__(self, profile: ClassProfile, columns: Tuple[str, ...]) -> None:
        features = [profile.features[c] for c in columns]
        self.mean = np.array([f.mean for f in features])
        self.spread = np.array([f.spread for f in features])
        self.rho = np.array([f.rho for f in features])
        self.innovation = self.spread * np.sqrt(1.0 - self.rho ** 2)
        self.last: Optional[np.ndarray] = None

    def step(self, rng: np.random.Generator) -> np.ndarray:
        noise = rng.standard_normal(self.mean.shape[0])
        if self.last is None:
            self.last = self.mean + self.spread * noise
        else:
            self.last = self.mean + self.rho * (self.last - self.mean) + self.innovation * noise
        return self.last


def generate_values(schema: DatasetSchema, profiles: ProfileSet,
                    counts: Mapping[str, int], seed: int,
                    mean_burst: float = DEFAULT_MEAN_BURST) -> Tuple[np.ndarray, List[str]]:
    """Real-valued rows (before kind formatting) and their class names."""
    if not mean_burst >= 1:
        raise ConfigError(f"mean_burst must be >= 1, got {mean_burst}")
    profiles.validate(schema)
    remaining = _check_counts(schema, profiles, counts)
    rng = np.random.default_rng(seed)
    chains = {name: _Chain(profiles.classes[name], schema.feature_columns)
              for name in remaining}
    rows: List[np.ndarray] = []
    labels: List[str] = []
    while remaining:
        names = list(remaining)
        owed = np.array([remaining[n] for n in names], dtype=np.float64)
        name = names[rng.choice(len(names), p=owed / owed.sum())]
        burst = min(int(rng.geometric(1.0 / mean_burst)), remaining[name])
        chain = chains[name]
        for _ in range(burst):
            rows.append(chain.step(rng).copy())
            labels.append(name)
        remaining[name] -= burst
        if remaining[name] == 0:
            del remaining[name]
    width = schema.num_features
    values = np.vstack(rows) if rows else np.zeros((0, width))
    return values, labels


def generate_records(schema: DatasetSchema, profiles: ProfileSet,
                     counts: Mapping[str, int], seed: int,
                     mean_burst: float = DEFAULT_MEAN_BURST) -> List[FlowRecord]:
    values, labels = generate_values(schema, profiles, counts, seed, mean_burst)
    columns = schema.feature_columns
    records = []
    for k, (row, label) in enumerate(zip(values, labels)):
        kinds = [profiles.classes[label].features[c].kind for c in columns]
        raw = {c: _format(v, kind) for c, v, kind in zip(columns, row, kinds)}
        records.append(FlowRecord(raw, label, k + 2))
    return records


def records_frame(records: List[FlowRecord], schema: DatasetSchema) -> pd.DataFrame:
    columns = list(schema.required_columns)
    return pd.DataFrame(
        [[r.raw[c] for c in schema.feature_columns] + [r.label] for r in records],
        columns=columns, dtype=str)


def generate(schema: DatasetSchema, profiles: ProfileSet, counts: Mapping[str, int],
             seed: int, path: Path | str,
             mean_burst: float = DEFAULT_MEAN_BURST) -> int:
    """Write a synthetic flow CSV to ``path``; returns the data-row count.

    All-zero counts give a header-only file. The same arguments always
    produce a byte-identical file.
    """
    records = generate_records(schema, profiles, counts, seed, mean_burst)
    frame = records_frame(records, schema)
    with atomic_write(path) as f:
        frame.to_csv(f, index=False, lineterminator="\n")
    per_class = {name: n for name, n in counts.items() if n}
    logger.info("Generated %d %s rows (%s) into %s", len(records), schema.name,
                ", ".join(f"{k}={v}" for k, v in per_class.items()) or "none", path)
    return len(records)


def parse_counts(text: str) -> Dict[str, int]:
    """``Normal=1000,DDoS=1000`` → ``{"Normal": 1000, "DDoS": 1000}``."""
    counts: Dict[str, int] = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        name, sep, value = part.partition("=")
        if not sep:
            raise ConfigError(f"Count {part!r} is not of the form Class=N")
        try:
            counts[name.strip()] = int(value)
        except ValueError:
            raise ConfigError(f"Count for {name.strip()!r} is not an integer: {value!r}") from None
    return counts


def equal_counts(schema: DatasetSchema, per_class: int) -> Dict[str, int]:
    return {name: per_class for name in schema.class_names}

