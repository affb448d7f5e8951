"""Configuration objects, presets and seed derivation.

One YAML file holds every stage::

    seed: 0
    data:  {n: 640, resolution: 256, ...}
    ae:    {epochs: 30, batch_size: 16, ...}
    ac:    {...}
    vton:  {alpha: 1.0, beta: 0.1, gamma: 0.1, ...}

Unknown keys are rejected so typos surface as config errors.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from tryon.errors import ConfigError

CLOTH_TYPE_NAMES = ("t-shirt", "long-sleeve", "dress", "blazer")
SIZE_NAMES = ("chest_circumference", "total_length", "sleeve_length")

OUT_ROOT_ENV = "TRYON_OUT_ROOT"


def derive_seed(root: int, *labels: object) -> int:
    """Expand a root seed into an independent 31-bit seed per label path.

    ``derive_seed(7, "ae")`` is sha256 of ``"7/ae"`` truncated to its first
    four bytes and masked to 31 bits, so seeds are stable across platforms
    and Python versions.
    """
    key = "/".join([str(int(root))] + [str(x) for x in labels])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


def default_size_ranges() -> dict[str, dict[str, list[float]]]:
    return {
        "t-shirt": {"chest_circumference": [80.0, 130.0], "total_length": [60.0, 90.0],
                    "sleeve_length": [15.0, 30.0]},
        "long-sleeve": {"chest_circumference": [80.0, 130.0], "total_length": [60.0, 90.0],
                        "sleeve_length": [50.0, 70.0]},
        "dress": {"chest_circumference": [75.0, 120.0], "total_length": [85.0, 135.0],
                  "sleeve_length": [10.0, 60.0]},
        "blazer": {"chest_circumference": [90.0, 140.0], "total_length": [65.0, 95.0],
                   "sleeve_length": [55.0, 70.0]},
    }


def default_quotas() -> dict[str, dict[str, Any]]:
    # image counts per clothed-figure group in the reference dataset
    return {
        "female": {"weight": 8412, "types": ["t-shirt", "long-sleeve", "dress"]},
        "male": {"weight": 6792, "types": ["t-shirt", "long-sleeve", "blazer"]},
    }


@dataclass
class GeneratorConfig:
    n: int = 640
    val_fraction: float = 0.2
    resolution: int = 256
    height_range: list[float] = field(default_factory=lambda: [140.0, 200.0])
    weight_range: list[float] = field(default_factory=lambda: [40.0, 120.0])
    ranges: dict[str, dict[str, list[float]]] = field(default_factory=default_size_ranges)
    quotas: dict[str, dict[str, Any]] = field(default_factory=default_quotas)

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigError(f"data.n must be positive, got {self.n}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"data.val_fraction must be in [0, 1), got {self.val_fraction}")
        check_resolution(self.resolution, "data.resolution")
        for name in CLOTH_TYPE_NAMES:
            if name not in self.ranges:
                continue
            for size in SIZE_NAMES:
                lo, hi = self.ranges[name][size]
                if lo > hi or lo < 0:
                    raise ConfigError(f"data.ranges.{name}.{size} is not a valid [min, max]: {[lo, hi]}")
        for group, quota in self.quotas.items():
            unknown = set(quota["types"]) - set(self.ranges)
            if unknown:
                raise ConfigError(f"data.quotas.{group} names types without ranges: {sorted(unknown)}")

    def size_bounds(self) -> list[list[float]]:
        """Per-size [min, max] over all configured types; used for normalization."""
        out = []
        for size in SIZE_NAMES:
            lo = min(r[size][0] for r in self.ranges.values())
            hi = max(r[size][1] for r in self.ranges.values())
            out.append([lo, hi])
        return out


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 0.001
    # "cosine" anneals the learning rate to zero over the run; "constant" keeps it fixed
    lr_schedule: str = "cosine"
    batch_size: int = 16
    epochs: int = 30
    seed: int = 0
    resolution: int = 128
    # attribute classifier only
    size_weight: float = 1.0
    backbone: str = "reduced"

    def validate(self) -> None:
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ConfigError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.backbone not in ("reduced", "resnet18"):
            raise ConfigError(f"unknown backbone {self.backbone!r}")
        if self.size_weight < 0:
            raise ConfigError("size_weight must be >= 0")
        check_resolution(self.resolution, "resolution")


@dataclass
class VtonConfig(TrainConfig):
    epochs: int = 20
    alpha: float = 1.0
    beta: float = 0.1
    gamma: float = 0.1
    attr_channels: int = 32
    # probability that a training item shows the garment at other sizes (see agvton.resized_cloth_masks)
    cloth_jitter: float = 0.5
    # "sum" is the standard soft Dice; "product" reproduces the printed Σp·Σq denominator
    dice_denominator: str = "sum"
    ae_checkpoint: str | None = None
    ac_checkpoint: str | None = None

    def validate(self) -> None:
        super().validate()
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ConfigError("loss weights must be non-negative")
        if not 0.0 <= self.cloth_jitter <= 1.0:
            raise ConfigError(f"cloth_jitter must lie in [0, 1], got {self.cloth_jitter}")
        if self.alpha + self.beta + self.gamma <= 0:
            raise ConfigError("alpha + beta + gamma must be positive")
        if self.dice_denominator not in ("sum", "product"):
            raise ConfigError(f"dice_denominator must be 'sum' or 'product', got {self.dice_denominator!r}")


@dataclass
class PipelineConfig:
    seed: int = 0
    data: GeneratorConfig = field(default_factory=GeneratorConfig)
    ae: TrainConfig = field(default_factory=TrainConfig)
    ac: TrainConfig = field(default_factory=TrainConfig)
    vton: VtonConfig = field(default_factory=VtonConfig)

    def validate(self) -> None:
        self.data.validate()
        self.ae.validate()
        self.ac.validate()
        self.vton.validate()


# The reference-scale setting: 512 px, batch 24, 300 epochs, full dataset size.
PRESETS: dict[str, dict[str, Any]] = {
    "desk": {},
    "full": {
        "data": {"n": 45612, "resolution": 512},
        "ae": {"resolution": 512, "batch_size": 24, "epochs": 300},
        "ac": {"resolution": 512, "batch_size": 24, "epochs": 300, "backbone": "resnet18"},
        "vton": {"resolution": 512, "batch_size": 24, "epochs": 300},
    },
}


def check_resolution(resolution: int, name: str = "resolution") -> None:
    if int(resolution) != resolution or resolution <= 0 or resolution % 16:
        raise ConfigError(f"{name} must be a positive multiple of 16, got {resolution}")


def _merge(target: Any, updates: dict[str, Any], where: str) -> Any:
    names = {f.name: f for f in dataclasses.fields(target)}
    for key, value in updates.items():
        if key not in names:
            raise ConfigError(f"unknown config key {where}{key}")
        current = getattr(target, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"config section {where}{key} must be a mapping")
            _merge(current, value, f"{where}{key}.")
        else:
            setattr(target, key, copy.deepcopy(value))
    return target


def build_config(overrides: dict[str, Any] | None = None, preset: str = "desk") -> PipelineConfig:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    cfg = PipelineConfig()
    _merge(cfg, PRESETS[preset], "")
    if overrides:
        _merge(cfg, overrides, "")
    cfg.validate()
    return cfg


def load_config(path: str | os.PathLike | None, preset: str = "desk") -> PipelineConfig:
    """Read a YAML config file; ``None`` gives the preset defaults."""
    if path is None:
        return build_config(preset=preset)
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return build_config(raw, preset=preset)


def to_dict(cfg: Any) -> dict[str, Any]:
    return dataclasses.asdict(cfg)


def dump_config(cfg: PipelineConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(yaml.safe_dump(to_dict(cfg), sort_keys=False))


def train_config_from_dict(d: dict[str, Any], cls: type = TrainConfig) -> TrainConfig:
    return _merge(cls(), d, "")


def resolve_output(path: str | os.PathLike) -> Path:
    """Relative output paths are placed under ``$TRYON_OUT_ROOT`` when it is set."""
    p = Path(path)
    root = os.environ.get(OUT_ROOT_ENV)
    if root and not p.is_absolute():
        return Path(root) / p
    return p
