"""Experiment configuration: a single versioned JSON document.

The config fixes everything an experiment needs - dataset source, partition
strategy, training recipe, selection knobs, methods, seeds - so any artifact
on disk is reproducible from config + seed alone. Validation errors carry
the offending field path (e.g. ``dataset.samples: must be an integer >= 2``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .data import PartitionSpec, STRATEGIES
from .errors import ConfigError, InvalidInputError
from .selection import SelectionConfig
from .training import ARCHITECTURES, TrainConfig

SCHEMA_VERSION = 1

ALL_METHODS = ("dedes", "cv", "ds", "rs", "as", "lds", "fedavg", "meanavg", "oracle")
TEAM_METHODS = ("dedes", "cv", "ds", "rs", "as", "lds")
FUSION_METHODS = ("fedavg", "meanavg")


@dataclass(frozen=True)
class DatasetSource:
    kind: str                 # "synthetic" or "csv"
    classes: int = 10
    features: int = 20
    samples: int = 2000
    separation: float = 3.0
    path: str = ""
    header: bool = False

    @property
    def name(self) -> str:
        return "synthetic" if self.kind == "synthetic" else Path(self.path).stem


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSource
    partition: PartitionSpec
    m: int
    split: tuple[float, float, float]
    train: TrainConfig
    selection: SelectionConfig
    methods: tuple[str, ...]
    seeds: tuple[int, ...]
    output_dir: str
    sweep_Ks: tuple[int, ...] | None = None
    m_cap: int = 16


class _Reader:
    """Typed field access over a JSON dict with path-tagged errors."""

    def __init__(self, doc: dict, path: str = ""):
        if not isinstance(doc, dict):
            raise ConfigError(f"{path or 'config'}: must be an object")
        self.doc = doc
        self.path = path

    def _at(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def section(self, key: str) -> "_Reader":
        if key not in self.doc:
            raise ConfigError(f"{self._at(key)}: missing required section")
        return _Reader(self.doc[key], self._at(key))

    def has(self, key: str) -> bool:
        return key in self.doc and self.doc[key] is not None

    def integer(self, key: str, default=None, minimum=None):
        if not self.has(key):
            if default is not None:
                return default
            raise ConfigError(f"{self._at(key)}: missing required integer")
        value = self.doc[key]
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{self._at(key)}: must be an integer")
        if minimum is not None and value < minimum:
            raise ConfigError(f"{self._at(key)}: must be an integer >= {minimum}")
        return value

    def number(self, key: str, default=None, positive=False):
        if not self.has(key):
            if default is not None:
                return default
            raise ConfigError(f"{self._at(key)}: missing required number")
        value = self.doc[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{self._at(key)}: must be a number")
        if positive and not value > 0:
            raise ConfigError(f"{self._at(key)}: must be positive")
        return float(value)

    def string(self, key: str, default=None, choices=None):
        if not self.has(key):
            if default is not None:
                return default
            raise ConfigError(f"{self._at(key)}: missing required string")
        value = self.doc[key]
        if not isinstance(value, str):
            raise ConfigError(f"{self._at(key)}: must be a string")
        if choices is not None and value not in choices:
            raise ConfigError(
                f"{self._at(key)}: must be one of {', '.join(choices)}"
            )
        return value

    def boolean(self, key: str, default=False):
        if not self.has(key):
            return default
        value = self.doc[key]
        if not isinstance(value, bool):
            raise ConfigError(f"{self._at(key)}: must be a boolean")
        return value

    def int_list(self, key: str, minimum=None, required=True):
        if not self.has(key):
            if required:
                raise ConfigError(f"{self._at(key)}: missing required list")
            return None
        value = self.doc[key]
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{self._at(key)}: must be a non-empty list")
        out = []
        for i, item in enumerate(value):
            if isinstance(item, bool) or not isinstance(item, int):
                raise ConfigError(f"{self._at(key)}[{i}]: must be an integer")
            if minimum is not None and item < minimum:
                raise ConfigError(f"{self._at(key)}[{i}]: must be >= {minimum}")
            out.append(item)
        return out


def parse_config(doc: dict) -> ExperimentConfig:
    root = _Reader(doc)
    version = root.integer("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version}")

    ds = root.section("dataset")
    kind = ds.string("kind", choices=("synthetic", "csv"))
    if kind == "synthetic":
        dataset = DatasetSource(
            kind="synthetic",
            classes=ds.integer("classes", minimum=2),
            features=ds.integer("features", minimum=1),
            samples=ds.integer("samples", minimum=2),
            separation=ds.number("separation", default=3.0, positive=True),
        )
    else:
        dataset = DatasetSource(
            kind="csv",
            path=ds.string("path"),
            header=ds.boolean("header"),
        )

    part = root.section("partition")
    try:
        spec = PartitionSpec(
            strategy=part.string("strategy", choices=STRATEGIES),
            beta=part.number("beta", default=0.5, positive=True),
            k_classes=part.integer("k_classes", default=2, minimum=1),
            quantity_skew=part.number("quantity_skew", default=1.5, positive=True),
        )
    except InvalidInputError as exc:
        raise ConfigError(f"partition: {exc}") from exc

    m = root.integer("m", minimum=2)

    split_raw = root.doc.get("split", [0.8, 0.1, 0.1])
    if (not isinstance(split_raw, list) or len(split_raw) != 3
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0
                   for v in split_raw)):
        raise ConfigError("split: must be three positive fractions")
    split = (float(split_raw[0]), float(split_raw[1]), float(split_raw[2]))
    if abs(sum(split) - 1.0) > 1e-9:
        raise ConfigError("split: fractions must sum to 1")

    tr = root.section("train")
    try:
        train = TrainConfig(
            epochs=tr.integer("epochs", default=100, minimum=1),
            batch_size=tr.integer("batch_size", default=32, minimum=1),
            lr_init=tr.number("lr_init", default=0.1, positive=True),
            lr_decay=tr.number("lr_decay", default=0.1, positive=True),
            lr_decay_every=tr.integer("lr_decay_every", default=40, minimum=1),
            hidden=tr.integer("hidden", default=16, minimum=1),
            arch=tr.string("arch", default="softmax", choices=ARCHITECTURES),
        )
    except InvalidInputError as exc:
        raise ConfigError(f"train: {exc}") from exc

    sel = root.section("selection")
    dr_dim = sel.integer("dr_dim", minimum=1) if sel.has("dr_dim") else None
    try:
        selection = SelectionConfig(
            K=sel.integer("K", minimum=1),
            tau=sel.number("tau", default=0.3, positive=True),
            outlier_low=sel.number("outlier_low", default=0.25),
            outlier_high=sel.number("outlier_high", default=0.75),
            outlier_scale=sel.number("outlier_scale", default=1.5),
            layer_strategy=sel.string("layer_strategy", default="last"),
            layer_fraction=sel.number("layer_fraction", default=0.1, positive=True),
            dr_method=sel.string("dr_method", default="none"),
            dr_dim=dr_dim,
            clustering=sel.string("clustering", default="auto"),
        )
    except InvalidInputError as exc:
        raise ConfigError(f"selection: {exc}") from exc

    methods_raw = root.doc.get("methods", list(ALL_METHODS))
    if not isinstance(methods_raw, list) or not methods_raw:
        raise ConfigError("methods: must be a non-empty list")
    for i, method in enumerate(methods_raw):
        if method not in ALL_METHODS:
            raise ConfigError(
                f"methods[{i}]: unknown method {method!r} "
                f"(choose from {', '.join(ALL_METHODS)})"
            )
    if len(set(methods_raw)) != len(methods_raw):
        raise ConfigError("methods: duplicates not allowed")

    seeds = root.int_list("seeds", minimum=0)
    sweep_raw = root.int_list("sweep_Ks", minimum=1, required=False)

    if selection.K > m:
        raise ConfigError(f"selection.K: {selection.K} exceeds m={m}")

    return ExperimentConfig(
        dataset=dataset,
        partition=spec,
        m=m,
        split=split,
        train=train,
        selection=selection,
        methods=tuple(methods_raw),
        seeds=tuple(seeds),
        output_dir=root.string("output_dir", default="runs"),
        sweep_Ks=tuple(sweep_raw) if sweep_raw else None,
        m_cap=root.integer("m_cap", default=16, minimum=1),
    )


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON at line {exc.lineno}") from exc
    return parse_config(doc)
