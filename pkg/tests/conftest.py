"""Shared fixtures: a two-class custom schema, its traffic profiles,
small model configs and ready-made window sets."""

from __future__ import annotations

import logging

import numpy as np
import pytest

from lstm_ids.config import ModelConfig
from lstm_ids.data.preprocess import preprocess
from lstm_ids.data.schemas import DatasetSchema
from lstm_ids.data.synth import ClassProfile, ProfileSet, generate_records

PAIR_MEANS = {
    "quiet": {"a": 0.0, "b": 0.0, "c": 0.0},
    "noisy": {"a": 6.0, "b": -6.0, "c": 6.0},
}


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch):
    monkeypatch.delenv("LBDMIDS_LOG_JSON", raising=False)
    monkeypatch.delenv("LBDMIDS_PROFILE", raising=False)
    monkeypatch.setenv("LBDMIDS_THREADS", "2")
    root = logging.getLogger()
    level = root.level
    yield
    for handler in list(root.handlers):
        if getattr(handler, "_lstm_ids_observability", False):
            root.removeHandler(handler)
    root.setLevel(level)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture()
def pair_schema():
    return DatasetSchema.custom(["a", "b", "c"], "label", ["quiet", "noisy"])


@pytest.fixture()
def pair_profiles():
    return ProfileSet("custom", {
        name: ClassProfile.build(name, means, spread=1.0, rho=0.5)
        for name, means in PAIR_MEANS.items()
    })


@pytest.fixture()
def make_split(pair_schema, pair_profiles):
    """Build a PreprocessResult of separable two-class traffic."""
    def build(timesteps: int = 3, per_class: int = 150, seed: int = 3):
        records = generate_records(pair_schema, pair_profiles,
                                   {"quiet": per_class, "noisy": per_class},
                                   seed, mean_burst=40)
        return preprocess(records, pair_schema, timesteps, 0.75, seed=0)
    return build


@pytest.fixture()
def tiny_config():
    return ModelConfig(layer_cells=(4,), epochs=3, learning_rate=0.01, timesteps=3,
                       batch_size=32, seed=5, early_stop_patience=None)
