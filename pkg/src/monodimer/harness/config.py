"""Experiment configuration stored as versioned JSON."""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    graph: str | dict  # generator spec ("grid:3,3" or {"family": ...}) or a graph file path
    lam: str = "1"
    chain: str = "js"
    seed: int = 0
    operation: str = "verify"
    params: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 bits")
        self.seed = int(self.seed)
        self.lam = str(self.lam)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        version = data.get("schema")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {version!r}")
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        return cls(**data)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())


def cell_rng(seed: int, name: str) -> np.random.Generator:
    """Independent stream per named cell: the name's crc32 becomes the spawn key."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),)))
