"""Loading a generated dataset split into tensors, plus attribute scaling."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import torch

from tryon.config import GeneratorConfig
from tryon.errors import DataError, ShapeError, ValidationError
from tryon.synthgen import (
    ClothAttributes,
    DatasetManifest,
    HumanAttributes,
    generator_config_from_manifest,
    read_manifest,
    read_mask,
)


@dataclass
class AttributeScaler:
    """Min/max scaling of sizes and human attributes to [0, 1].

    Values are only ever normalized at network boundaries; everything stored
    on disk stays in cm / kg.
    """

    size_bounds: list[list[float]]
    height_range: list[float]
    weight_range: list[float]

    @classmethod
    def from_generator(cls, cfg: GeneratorConfig) -> "AttributeScaler":
        return cls(cfg.size_bounds(), list(cfg.height_range), list(cfg.weight_range))

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeScaler":
        return cls(d["size_bounds"], d["height_range"], d["weight_range"])

    def to_dict(self) -> dict:
        return {"size_bounds": self.size_bounds, "height_range": self.height_range,
                "weight_range": self.weight_range}

    def _size_lo_span(self, like: torch.Tensor):
        b = torch.tensor(self.size_bounds, dtype=like.dtype)
        return b[:, 0], b[:, 1] - b[:, 0]

    def norm_sizes(self, cm: torch.Tensor) -> torch.Tensor:
        lo, span = self._size_lo_span(cm)
        return (cm - lo) / span

    def denorm_sizes(self, unit: torch.Tensor) -> torch.Tensor:
        lo, span = self._size_lo_span(unit)
        return lo + unit * span

    def norm_human(self, raw: torch.Tensor) -> torch.Tensor:
        lo = torch.tensor([self.height_range[0], self.weight_range[0]], dtype=raw.dtype)
        hi = torch.tensor([self.height_range[1], self.weight_range[1]], dtype=raw.dtype)
        return (raw - lo) / (hi - lo)


def attrs_to_tensors(cloth: list[ClothAttributes], human: list[HumanAttributes]):
    types = torch.tensor([int(c.cloth_type) for c in cloth], dtype=torch.long)
    sizes = torch.tensor([c.sizes for c in cloth], dtype=torch.float32)
    hum = torch.tensor([(h.height, h.weight) for h in human], dtype=torch.float32)
    return types, sizes, hum


@dataclass
class MaskDataset:
    ids: list[str]
    user: torch.Tensor      # (N, 1, R, R) uint8
    cloth: torch.Tensor     # (N, 1, R, R) uint8
    clothed: torch.Tensor   # (N, 2, R, R) uint8, body then cloth channel
    types: torch.Tensor     # (N,) long
    sizes: torch.Tensor     # (N, 3) cm
    human: torch.Tensor     # (N, 2) height cm, weight kg
    cloth_attrs: list[ClothAttributes]
    human_attrs: list[HumanAttributes]

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def resolution(self) -> int:
        return self.user.shape[-1]


def downsample_mask(mask: np.ndarray, factor: int) -> np.ndarray:
    """Block mean over ``factor`` x ``factor`` cells, re-binarized at 0.5."""
    if factor == 1:
        return mask
    r = mask.shape[0] // factor
    return (mask.reshape(r, factor, r, factor).mean(axis=(1, 3)) >= 0.5).astype(np.uint8)


def load_split(source: str | os.PathLike | DatasetManifest, split: str, resolution: int | None = None) -> MaskDataset:
    manifest = source if isinstance(source, DatasetManifest) else read_manifest(source)
    records = manifest.split(split) if split != "all" else list(manifest.records)
    if not records:
        raise ValidationError("dataset", f"split {split!r} of {manifest.root} is empty")
    native = manifest.resolution
    resolution = native if resolution is None else resolution
    if native % resolution:
        raise ShapeError(f"resolution mismatch: dataset is {native}px, requested {resolution}px")
    factor = native // resolution

    def load(rec, kind):
        m = read_mask(manifest.path(rec, kind))
        if m.shape != (native, native):
            raise DataError(f"{manifest.path(rec, kind)}: expected {native}x{native}, got {m.shape}")
        return downsample_mask(m, factor)

    n = len(records)
    user = np.empty((n, 1, resolution, resolution), np.uint8)
    cloth = np.empty_like(user)
    clothed = np.empty((n, 2, resolution, resolution), np.uint8)
    for i, rec in enumerate(records):
        user[i, 0] = load(rec, "user")
        cloth[i, 0] = load(rec, "cloth")
        clothed[i, 0] = load(rec, "body")
        clothed[i, 1] = load(rec, "clothch")
    cloth_attrs = [ClothAttributes.from_json(r["cloth"]) for r in records]
    human_attrs = [HumanAttributes.from_json(r["human"]) for r in records]
    types, sizes, hum = attrs_to_tensors(cloth_attrs, human_attrs)
    return MaskDataset(
        ids=[r["sample_id"] for r in records],
        user=torch.from_numpy(user),
        cloth=torch.from_numpy(cloth),
        clothed=torch.from_numpy(clothed),
        types=types,
        sizes=sizes,
        human=hum,
        cloth_attrs=cloth_attrs,
        human_attrs=human_attrs,
    )


def scaler_for(manifest: DatasetManifest) -> AttributeScaler:
    return AttributeScaler.from_generator(generator_config_from_manifest(manifest))
