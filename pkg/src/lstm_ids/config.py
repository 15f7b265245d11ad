"""Model configuration, the published presets, and environment settings.

A ModelConfig fixes everything a training run depends on. The four
presets carry the layer widths, epoch counts and learning rates of the
reference stacked and bidirectional models verbatim; the knobs those
models never stated (batch size, timesteps, patience, seed) take the
documented defaults below.

Resolution order for a run: explicit CLI flags → ``[model]`` table of a
TOML run config → preset → defaults.
"""

from __future__ import annotations

import numbers
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import List, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from lstm_ids.exceptions import ConfigError

VARIANTS = ("stacked", "bidirectional")
DATASETS = ("unsw_nb15", "bot_iot")

DEFAULT_BATCH_SIZE = 256
DEFAULT_TIMESTEPS = 10
DEFAULT_PATIENCE = 5
DEFAULT_SEED = 0
DEFAULT_TRAIN_FRACTION = 0.75

THREADS_ENV = "LBDMIDS_THREADS"


def _is_int(value) -> bool:
    return isinstance(value, numbers.Integral) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _cells(value):
    """``layer_cells`` as a tuple; anything malformed is kept for validate()."""
    if isinstance(value, (list, tuple)):
        return tuple(int(c) if _is_int(c) else c for c in value)
    return value


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "stacked"
    layer_cells: Tuple[int, ...] = (32,)
    epochs: int = 5
    learning_rate: float = 0.002
    timesteps: int = DEFAULT_TIMESTEPS
    batch_size: int = DEFAULT_BATCH_SIZE
    seed: int = DEFAULT_SEED
    clip_global_norm: Optional[float] = None
    early_stop_patience: Optional[int] = DEFAULT_PATIENCE

    @property
    def bidirectional(self) -> bool:
        return self.variant == "bidirectional"

    def validate(self) -> List[str]:
        """Every violation of the config invariants, empty when valid."""
        problems = []
        if self.variant not in VARIANTS:
            problems.append(
                f"variant must be one of {', '.join(VARIANTS)}, got {self.variant!r}")
        if not isinstance(self.layer_cells, (list, tuple)) or not all(
                _is_int(c) for c in self.layer_cells):
            problems.append(
                f"layer_cells must be a list of integers, got {self.layer_cells!r}")
        elif not self.layer_cells:
            problems.append("layer_cells must name at least one layer")
        else:
            if any(c < 1 for c in self.layer_cells):
                problems.append(
                    f"layer_cells must all be >= 1, got {list(self.layer_cells)}")
            if self.variant == "bidirectional" and len(self.layer_cells) != 1:
                problems.append(
                    "bidirectional models take exactly one layer, got "
                    f"{len(self.layer_cells)}")
        for name, low in (("epochs", 1), ("timesteps", 1), ("batch_size", 1), ("seed", 0)):
            value = getattr(self, name)
            if not _is_int(value):
                problems.append(f"{name} must be an integer, got {value!r}")
            elif value < low:
                problems.append(f"{name} must be >= {low}, got {value}")
        if not _is_number(self.learning_rate):
            problems.append(f"learning_rate must be a number, got {self.learning_rate!r}")
        elif not self.learning_rate > 0:
            problems.append(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.clip_global_norm is not None:
            if not _is_number(self.clip_global_norm):
                problems.append(
                    f"clip_global_norm must be a number, got {self.clip_global_norm!r}")
            elif not self.clip_global_norm > 0:
                problems.append(
                    f"clip_global_norm must be > 0 when set, got {self.clip_global_norm}")
        if self.early_stop_patience is not None:
            if not _is_int(self.early_stop_patience):
                problems.append(
                    "early_stop_patience must be an integer, got "
                    f"{self.early_stop_patience!r}")
            elif self.early_stop_patience < 1:
                problems.append(
                    "early_stop_patience must be >= 1 when set, got "
                    f"{self.early_stop_patience}")
        return problems

    def ensure_valid(self) -> "ModelConfig":
        problems = self.validate()
        if problems:
            raise ConfigError(problems)
        return self

    def with_overrides(self, **overrides) -> "ModelConfig":
        """Copy with every non-None override applied."""
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError(f"Unknown model setting(s): {', '.join(unknown)}")
        given = {k: v for k, v in overrides.items() if v is not None}
        if "layer_cells" in given:
            given["layer_cells"] = _cells(given["layer_cells"])
        return replace(self, **given)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["layer_cells"] = list(self.layer_cells)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown model setting(s): {', '.join(unknown)}")
        values = dict(data)
        if "layer_cells" in values:
            values["layer_cells"] = _cells(values["layer_cells"])
        return cls(**values)


# ── Presets ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Preset:
    key: str            # CLI value, e.g. "botiot-stacked"
    dataset: str        # schema name
    variant: str
    layer_cells: Tuple[int, ...]
    epochs: int
    learning_rate: float


PRESETS: dict = {
    p.key: p
    for p in (
        Preset("unsw-stacked", "unsw_nb15", "stacked", (40, 128, 128, 64), 50, 0.002),
        Preset("botiot-stacked", "bot_iot", "stacked", (32, 32), 5, 0.002),
        Preset("unsw-bilstm", "unsw_nb15", "bidirectional", (64,), 50, 0.0015),
        Preset("botiot-bilstm", "bot_iot", "bidirectional", (12,), 5, 0.001),
    )
}


def get_preset(key: str) -> Preset:
    """Look up a preset by its CLI key."""
    try:
        return PRESETS[key]
    except KeyError:
        raise ConfigError(
            f"Unknown preset: {key!r}. Valid presets: {', '.join(sorted(PRESETS))}"
        ) from None


def preset_config(dataset: str, variant: str) -> ModelConfig:
    """The published hyperparameters for ``(dataset, variant)``."""
    for preset in PRESETS.values():
        if preset.dataset == dataset and preset.variant == variant:
            return config_from_preset(preset)
    raise ConfigError(
        f"No preset for dataset {dataset!r} and variant {variant!r}. "
        f"Datasets: {', '.join(DATASETS)}; variants: {', '.join(VARIANTS)}")


def config_from_preset(preset: Preset) -> ModelConfig:
    return ModelConfig(
        variant=preset.variant,
        layer_cells=preset.layer_cells,
        epochs=preset.epochs,
        learning_rate=preset.learning_rate,
    )


# ── Run-config files and environment ─────────────────────────────────

def load_run_config(path: Path | str) -> dict:
    """Read the ``[model]`` table of a TOML run config as override fields."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Run config not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Invalid run config {path}: {e}") from e
    model = data.get("model", {})
    if not isinstance(model, dict):
        raise ConfigError(f"Run config {path}: [model] must be a table")
    known = {f.name for f in fields(ModelConfig)}
    unknown = sorted(set(model) - known)
    if unknown:
        raise ConfigError(
            [f"Run config {path}: unknown [model] key {key!r}" for key in unknown])
    return dict(model)


def worker_threads() -> int:
    """Worker-thread cap from ``$LBDMIDS_THREADS``, default all CPUs."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value
