"""Structured run configuration: JSON file, environment, flag overrides.

One config document covers segmentation, embedding training defaults,
classifier defaults, dataset ratios, and service settings. Unknown keys
are rejected so typos fail loudly. Environment variables override the
service's deployment knobs (port, store root, model paths, worker count,
upload cap).
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .segmenter import SegmenterConfig


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class EmbeddingDefaults:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    learning_rate: float = 0.025
    epochs: int = 5
    subsample_t: float = 1e-4
    min_count: int = 5


@dataclass(frozen=True)
class ClassifierDefaults:
    learning_rate: float = 0.05
    epochs: int = 20
    l2: float = 1e-4
    class_weight_pos: float | None = None


@dataclass(frozen=True)
class DatasetDefaults:
    train_ratio: float = 0.8
    dev_ratio: float = 0.1
    test_ratio: float = 0.1
    neg_per_pos_train: float = 10.0
    neg_per_pos_dev: float = 10.0
    neg_per_pos_test: float = 3.0

    @property
    def ratios(self) -> tuple[float, float, float]:
        return (self.train_ratio, self.dev_ratio, self.test_ratio)

    @property
    def neg_per_pos(self) -> dict[str, float]:
        return {
            "train": self.neg_per_pos_train,
            "dev": self.neg_per_pos_dev,
            "test": self.neg_per_pos_test,
        }


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    store_root: str = "./qa-store"
    embeddings_path: str = "./models/embeddings.sgns"
    classifier_path: str = "./models/classifier.pcls"
    questions_path: str | None = None  # None = packaged question set
    workers: int = 2
    max_upload_mb: int = 50

    @property
    def max_upload_bytes(self) -> int:
        return self.max_upload_mb * 1024 * 1024


_ENV_OVERRIDES = {
    "DISCLOSURE_QA_PORT": ("service", "port", int),
    "DISCLOSURE_QA_STORE_ROOT": ("service", "store_root", str),
    "DISCLOSURE_QA_EMBEDDINGS": ("service", "embeddings_path", str),
    "DISCLOSURE_QA_CLASSIFIER": ("service", "classifier_path", str),
    "DISCLOSURE_QA_WORKERS": ("service", "workers", int),
    "DISCLOSURE_QA_MAX_UPLOAD_MB": ("service", "max_upload_mb", int),
}


@dataclass(frozen=True)
class RunConfig:
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    embeddings: EmbeddingDefaults = field(default_factory=EmbeddingDefaults)
    classifier: ClassifierDefaults = field(default_factory=ClassifierDefaults)
    dataset: DatasetDefaults = field(default_factory=DatasetDefaults)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    kern_space_threshold: float = 180.0


_SECTIONS = {
    "segmenter": SegmenterConfig,
    "embeddings": EmbeddingDefaults,
    "classifier": ClassifierDefaults,
    "dataset": DatasetDefaults,
    "service": ServiceConfig,
}


def _build_section(cls, payload: dict, where: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(payload) - set(fields)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in payload.items():
        if key == "abbreviations":
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path: str | Path | None = None, env: dict | None = None) -> RunConfig:
    """Load a RunConfig from an optional JSON file plus environment overrides."""
    payload: dict = {}
    if path is not None:
        try:
            payload = json.loads(Path(path).read_text("utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError("config file must contain a JSON object")

    unknown = set(payload) - set(_SECTIONS) - {"kern_space_threshold"}
    if unknown:
        raise ConfigError(f"unknown top-level config keys {sorted(unknown)}")

    sections = {}
    for name, cls in _SECTIONS.items():
        body = payload.get(name, {})
        if not isinstance(body, dict):
            raise ConfigError(f"{name}: must be an object")
        sections[name] = _build_section(cls, body, name)

    env = os.environ if env is None else env
    service = sections["service"]
    for var, (_, attr, cast) in _ENV_OVERRIDES.items():
        if var in env:
            try:
                service = dataclasses.replace(service, **{attr: cast(env[var])})
            except ValueError as exc:
                raise ConfigError(f"bad value for {var}: {exc}") from exc
    sections["service"] = service

    kern = payload.get("kern_space_threshold", 180.0)
    if not isinstance(kern, (int, float)) or kern <= 0:
        raise ConfigError("kern_space_threshold must be a positive number")
    return RunConfig(kern_space_threshold=float(kern), **sections)
