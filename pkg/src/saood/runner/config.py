"""Experiment configuration.

The file format is one ``key = value`` per line; ``#`` starts a comment.
Keys use dotted section prefixes (``train.lr0 = 0.1``). Lists are
comma-separated. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

from ..datasets import OOD_KINDS
from ..gradnet import TrainConfig

METHODS = ("baseline", "sa", "msmi", "mbce")


class ConfigError(ValueError):
    pass


def _floats(text):
    return [float(v) for v in _strings(text)]


def _ints(text):
    return [int(v) for v in _strings(text)]


def _strings(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (attribute path, parser)
_KEYS = {
    "method": (("method",), str),
    "alpha": (("alpha",), float),
    "epsilon": (("epsilon",), float),
    "seed": (("seed",), int),
    "output_dir": (("output_dir",), str),
    "msmi.stop_gradient": (("msmi_stop_gradient",), _bool),
    "trend.every": (("trend_every",), int),
    "train.hidden": (("train", "hidden"), _ints),
    "train.lr0": (("train", "lr0"), float),
    "train.lr_decay_epochs": (("train", "lr_decay_epochs"), _ints),
    "train.lr_decay_factor": (("train", "lr_decay_factor"), float),
    "train.momentum": (("train", "momentum"), float),
    "train.weight_decay": (("train", "weight_decay"), float),
    "train.epochs": (("train", "epochs"), int),
    "train.batch_size": (("train", "batch_size"), int),
    "data.source": (("data", "source"), str),
    "data.k": (("data", "k"), int),
    "data.d": (("data", "d"), int),
    "data.per_class": (("data", "per_class"), int),
    "data.test_per_class": (("data", "test_per_class"), int),
    "data.spread": (("data", "spread"), float),
    "data.ood_train": (("data", "ood_train"), _strings),
    "data.ood_test": (("data", "ood_test"), _strings),
    "data.ood_test_n": (("data", "ood_test_n"), int),
    "ood.ring.r_lo": (("data", "ood_params", "ring", "r_lo"), float),
    "ood.ring.r_hi": (("data", "ood_params", "ring", "r_hi"), float),
    "ood.uniform_noise.lo": (("data", "ood_params", "uniform_noise", "lo"), float),
    "ood.uniform_noise.hi": (("data", "ood_params", "uniform_noise", "hi"), float),
    "ood.shifted_blob.radius": (("data", "ood_params", "shifted_blob", "radius"), float),
    "ood.shifted_blob.angle": (("data", "ood_params", "shifted_blob", "angle"), float),
    "ood.shifted_blob.spread": (("data", "ood_params", "shifted_blob", "spread"), float),
    "csv.id_train": (("data", "id_train_csv"), str),
    "csv.id_test": (("data", "id_test_csv"), str),
    "csv.ood_train": (("data", "ood_train_csv"), _strings),
    "csv.ood_test": (("data", "ood_test_csv"), _strings),
}


def _default_ood_params():
    return {
        "ring": {"r_lo": 5.0, "r_hi": 7.0},
        "uniform_noise": {"lo": -7.0, "hi": 7.0},
        "gaussian_noise": {},
        "shifted_blob": {"radius": 6.0, "angle": math.pi / 4, "spread": 0.5},
    }


@dataclass
class DataConfig:
    source: str = "synthetic"
    k: int = 4
    d: int = 2
    per_class: int = 250
    test_per_class: int = 250
    spread: float = 1.0
    ood_train: list = field(default_factory=lambda: ["ring"])
    ood_test: list = field(default_factory=lambda: ["ring", "uniform_noise", "shifted_blob"])
    ood_test_n: int = 1000
    ood_params: dict = field(default_factory=_default_ood_params)
    id_train_csv: str = ""
    id_test_csv: str = ""
    ood_train_csv: list = field(default_factory=list)
    ood_test_csv: list = field(default_factory=list)


@dataclass
class ExperimentConfig:
    method: str = "sa"
    alpha: float = 0.2
    epsilon: float = 0.05
    seed: int = 0
    output_dir: str = "runs/default"
    msmi_stop_gradient: bool = False
    trend_every: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.trend_every < 1:
            raise ConfigError("trend.every must be at least 1")
        data = self.data
        if data.source not in ("synthetic", "csv"):
            raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {data.source!r}")
        if data.source == "synthetic":
            for kind in data.ood_train + data.ood_test:
                if kind not in OOD_KINDS:
                    raise ConfigError(f"unknown OOD kind {kind!r}; expected one of {OOD_KINDS}")
            if not data.ood_test:
                raise ConfigError("data.ood_test must name at least one OOD test set")
        else:
            if not data.id_train_csv or not data.id_test_csv:
                raise ConfigError("csv.id_train and csv.id_test are required for data.source = csv")
            if not data.ood_test_csv:
                raise ConfigError("csv.ood_test must list at least one file")
        try:
            self.train.__post_init__()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def _assign(cfg, path, value):
    target = cfg
    for name in path[:-1]:
        target = target[name] if isinstance(target, dict) else getattr(target, name)
    if isinstance(target, dict):
        target[path[-1]] = value
    else:
        setattr(target, path[-1], value)


def apply_overrides(cfg, pairs):
    """Apply ``(key, text)`` pairs in order; raises ConfigError on unknown keys."""
    for key, text in pairs:
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        path, parse = _KEYS[key]
        try:
            value = parse(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
        _assign(cfg, path, value)
    return cfg


def parse_lines(text, source="<config>"):
    pairs = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{source}:{line_no}: unknown config key {key!r}")
        pairs.append((key, value))
    return pairs


def load_config(path=None, overrides=()):
    cfg = ExperimentConfig()
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        apply_overrides(cfg, parse_lines(text, path))
    apply_overrides(cfg, overrides)
    return cfg.validate()


def dump_config(cfg):
    """Render a config back into the file format (round-trips through load_config)."""
    flat = cfg.to_dict()
    lines = []
    for key, (path, _) in _KEYS.items():
        value = flat
        for name in path:
            value = value[name]
        if isinstance(value, list):
            value = ", ".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
