"""Procedural generator for (user mask, cloth mask, clothed-human mask) triples.

Everything is drawn in a frame that spans 220 cm vertically, so one
centimetre is ``resolution / 220`` pixels for every conversion.

Body
    Frontal A-pose silhouette: elliptical head, neck, a trapezoid torso
    whose chest-row width grows affinely with weight, capsule arms hanging
    45 degrees outward and capsule legs.  Vertically centred, mirror
    symmetric about the centre column.

Garments
    A torso panel (constant width ``chest/2`` down to 25 cm below the
    shoulder line, then a per-type flare towards the hem), a per-type
    neckline cut and two rectangular sleeves whose width follows the chest
    size.  Sleeves are always clipped to the panel's vertical extent, so
    the garment height in pixels is exactly ``round(total_length * px/cm)``.

Draping
    The garment is hung from the body's shoulder line.  Each panel row is
    ``max(body width + 2*ease, natural width)`` wide (arms excluded from the
    body width), sleeves follow the arm axis, and the body channel is what
    remains of the user mask.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Any, Iterator

import numpy as np
from PIL import Image

from tryon.config import (
    CLOTH_TYPE_NAMES,
    SIZE_NAMES,
    GeneratorConfig,
    default_size_ranges,
    derive_seed,
    to_dict,
)
from tryon.errors import DataError, ShapeError, ValidationError

log = logging.getLogger(__name__)

FRAME_CM = 220.0
HEIGHT_RANGE = (140.0, 200.0)
WEIGHT_RANGE = (40.0, 120.0)
MANIFEST_NAME = "manifest.jsonl"
MANIFEST_SCHEMA_VERSION = 1
MASK_SUFFIXES = ("user", "cloth", "body", "clothch")

# cm below the shoulder line over which a garment keeps its chest width
CHEST_BAND_CM = 25.0
ARM_ANGLE = math.radians(45.0)
FLARE = {"t-shirt": 0.06, "long-sleeve": 0.06, "dress": 0.6, "blazer": 0.12}


class ClothType(IntEnum):
    T_SHIRT = 0
    LONG_SLEEVE = 1
    DRESS = 2
    BLAZER = 3

    @property
    def label(self) -> str:
        return CLOTH_TYPE_NAMES[self.value]

    @classmethod
    def parse(cls, value: "ClothType | str | int") -> "ClothType":
        if isinstance(value, ClothType):
            return value
        if isinstance(value, str):
            try:
                return cls(CLOTH_TYPE_NAMES.index(value))
            except ValueError:
                raise ValidationError("cloth_type", f"unknown type {value!r}") from None
        return cls(int(value))


@dataclass(frozen=True)
class ClothAttributes:
    cloth_type: ClothType
    chest_circumference: float
    total_length: float
    sleeve_length: float

    def __post_init__(self):
        object.__setattr__(self, "cloth_type", ClothType.parse(self.cloth_type))

    @property
    def sizes(self) -> tuple[float, float, float]:
        return (self.chest_circumference, self.total_length, self.sleeve_length)

    def validate(self, ranges: dict | None = None) -> None:
        for name, value in zip(SIZE_NAMES, self.sizes):
            if not math.isfinite(value):
                raise ValidationError(name, f"must be finite, got {value}")
        if self.chest_circumference <= 0 or self.total_length <= 0:
            raise ValidationError("chest_circumference/total_length", "must be positive")
        if self.sleeve_length < 0:
            raise ValidationError("sleeve_length", f"must be non-negative, got {self.sleeve_length}")
        if ranges is None:
            return
        row = ranges.get(self.cloth_type.label)
        if row is None:
            raise ValidationError("cloth_type", f"no size range configured for {self.cloth_type.label}")
        for name, value in zip(SIZE_NAMES, self.sizes):
            lo, hi = row[name]
            if not lo <= value <= hi:
                raise ValidationError(name, f"{value} outside [{lo}, {hi}] for {self.cloth_type.label}")

    def to_json(self) -> dict[str, Any]:
        return {"cloth_type": self.cloth_type.label, "chest_circumference": self.chest_circumference,
                "total_length": self.total_length, "sleeve_length": self.sleeve_length}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "ClothAttributes":
        return cls(ClothType.parse(d["cloth_type"]), float(d["chest_circumference"]),
                   float(d["total_length"]), float(d["sleeve_length"]))


@dataclass(frozen=True)
class HumanAttributes:
    height: float
    weight: float

    def validate(self, height_range=HEIGHT_RANGE, weight_range=WEIGHT_RANGE) -> None:
        if not (math.isfinite(self.height) and height_range[0] <= self.height <= height_range[1]):
            raise ValidationError("height", f"{self.height} outside [{height_range[0]}, {height_range[1]}] cm")
        if not (math.isfinite(self.weight) and weight_range[0] <= self.weight <= weight_range[1]):
            raise ValidationError("weight", f"{self.weight} outside [{weight_range[0]}, {weight_range[1]}] kg")

    def to_json(self) -> dict[str, float]:
        return {"height": self.height, "weight": self.weight}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "HumanAttributes":
        return cls(float(d["height"]), float(d["weight"]))


@dataclass
class TwoChannelMask:
    """Channel 0 is the uncovered body, channel 1 the garment."""

    body: np.ndarray
    cloth: np.ndarray

    def __post_init__(self):
        if self.body.shape != self.cloth.shape or self.body.ndim != 2:
            raise ShapeError(f"channel shapes differ or are not 2-D: {self.body.shape} vs {self.cloth.shape}")

    @property
    def resolution(self) -> int:
        return self.body.shape[0]

    def stack(self) -> np.ndarray:
        return np.stack([self.body, self.cloth])

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "TwoChannelMask":
        arr = np.asarray(arr)
        if arr.ndim != 3 or arr.shape[0] != 2:
            raise ShapeError(f"expected a (2, H, W) array, got {arr.shape}")
        return cls(arr[0], arr[1])


@dataclass
class Sample:
    user_mask: np.ndarray
    cloth_mask: np.ndarray
    clothed: TwoChannelMask
    cloth_attrs: ClothAttributes
    human_attrs: HumanAttributes
    sample_id: str
    seed: int
    group: str = ""


def px_per_cm(resolution: int) -> float:
    return resolution / FRAME_CM


def ease_px(resolution: int) -> int:
    """2 px at 256, linear in resolution."""
    return max(1, int(round(2 * resolution / 256)))


def check_resolution(resolution: int) -> None:
    if int(resolution) != resolution or resolution <= 0 or resolution % 16:
        raise ShapeError(f"resolution must be a positive multiple of 16, got {resolution}")


def _grid(resolution: int) -> tuple[np.ndarray, np.ndarray]:
    rows = np.arange(resolution, dtype=np.float64)[:, None]
    cols = np.arange(resolution, dtype=np.float64)[None, :] - (resolution - 1) / 2.0
    return rows, cols


def _capsule(rows, cols, a, b, radius) -> np.ndarray:
    """Points within ``radius`` of segment a-b; points are (x, y) in grid coordinates."""
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    px, py = cols - ax, rows - ay
    t = np.clip((px * dx + py * dy) / (dx * dx + dy * dy), 0.0, 1.0)
    return (px - t * dx) ** 2 + (py - t * dy) ** 2 <= radius * radius


def _strip(rows, cols, root, direction, length, half_width) -> np.ndarray:
    """Rectangle from ``root`` along unit ``direction`` for ``length`` px, ``half_width`` px either side."""
    ux, uy = direction
    px, py = cols - root[0], rows - root[1]
    along = px * ux + py * uy
    across = np.abs(px * uy - py * ux)
    return (along >= 0) & (along <= length) & (across <= half_width)


@dataclass(frozen=True)
class BodyGeometry:
    """Landmarks of the procedural body in pixel units (x relative to the centre column)."""

    resolution: int
    height_px: int
    top: int
    shoulder_row: int
    chest_row: int
    hip_row: float
    chest_width: float
    shoulder_half: float
    torso_slope: float
    arm_radius: float
    arm_length: float
    leg_radius: float

    @classmethod
    def from_attrs(cls, attrs: HumanAttributes, resolution: int) -> "BodyGeometry":
        h = int(round(attrs.height / FRAME_CM * resolution))
        top = (resolution - h) // 2
        wn = (attrs.weight - WEIGHT_RANGE[0]) / (WEIGHT_RANGE[1] - WEIGHT_RANGE[0])
        chest_width = (0.25 + 0.5 * wn) * 0.35 * resolution
        shoulder_row = int(round(top + 0.18 * h))
        chest_row = int(round(top + 0.30 * h))
        shoulder_half = 0.525 * chest_width
        slope = (chest_width / 2 - shoulder_half) / (chest_row - shoulder_row)
        hip_row = top + 0.52 * h
        hip_half = chest_width / 2 + slope * (hip_row - chest_row)
        return cls(
            resolution=resolution,
            height_px=h,
            top=top,
            shoulder_row=shoulder_row,
            chest_row=chest_row,
            hip_row=hip_row,
            chest_width=chest_width,
            shoulder_half=shoulder_half,
            torso_slope=slope,
            arm_radius=0.022 * h * (0.8 + 0.5 * wn),
            arm_length=0.33 * h,
            leg_radius=0.48 * hip_half,
        )

    @property
    def bottom(self) -> int:
        return self.top + self.height_px - 1

    def arm_joint(self, side: int) -> tuple[float, float]:
        return (side * (self.shoulder_half - self.arm_radius), self.shoulder_row + self.arm_radius)

    @staticmethod
    def arm_direction(side: int) -> tuple[float, float]:
        return (side * math.sin(ARM_ANGLE), math.cos(ARM_ANGLE))

    def arms(self, rows, cols, pad: float = 0.0) -> np.ndarray:
        out = np.zeros(np.broadcast_shapes(rows.shape, cols.shape), dtype=bool)
        for side in (-1, 1):
            jx, jy = self.arm_joint(side)
            ux, uy = self.arm_direction(side)
            hand = (jx + ux * self.arm_length, jy + uy * self.arm_length)
            out |= _capsule(rows, cols, (jx, jy), hand, self.arm_radius + pad)
        return out

    def render(self) -> np.ndarray:
        rows, cols = _grid(self.resolution)
        h = self.height_px
        head_cy = self.top + 0.065 * h
        head = ((cols / (0.05 * h)) ** 2 + ((rows - head_cy) / (0.065 * h + 0.5)) ** 2) <= 1.0
        neck = (np.abs(cols) <= 0.025 * h) & (rows >= head_cy) & (rows <= self.shoulder_row)
        half = self.chest_width / 2 + self.torso_slope * (rows - self.chest_row)
        torso = (rows >= self.shoulder_row) & (rows <= self.hip_row) & (np.abs(cols) <= half)
        body = head | neck | torso | self.arms(rows, cols)
        hip_half = self.chest_width / 2 + self.torso_slope * (self.hip_row - self.chest_row)
        for side in (-1, 1):
            hip = (side * 0.5 * hip_half, self.hip_row - self.leg_radius)
            foot = (side * (0.5 * hip_half + 0.02 * h), self.bottom + self.leg_radius)
            body |= _capsule(rows, cols, hip, foot, self.leg_radius)
        body &= (rows >= self.top) & (rows <= self.bottom)
        return body.astype(np.uint8)


def generate_human_mask(attrs: HumanAttributes, resolution: int, *,
                        height_range=HEIGHT_RANGE, weight_range=WEIGHT_RANGE) -> np.ndarray:
    """Binary frontal silhouette whose pixel height is ``round(height / 220 * resolution)``."""
    check_resolution(resolution)
    attrs.validate(height_range, weight_range)
    return BodyGeometry.from_attrs(attrs, resolution).render()


def sample_attributes(cloth_type: ClothType | str, rng_seed: int, ranges: dict | None = None) -> ClothAttributes:
    """Uniform draw of the three sizes inside the type's configured [min, max] rows."""
    cloth_type = ClothType.parse(cloth_type)
    ranges = default_size_ranges() if ranges is None else ranges
    if cloth_type.label not in ranges:
        raise ValidationError("cloth_type", f"no size range configured for {cloth_type.label}")
    row = ranges[cloth_type.label]
    rng = np.random.default_rng(rng_seed)
    sizes = [float(rng.uniform(row[name][0], row[name][1])) for name in SIZE_NAMES]
    return ClothAttributes(cloth_type, *sizes)


def garment_length_px(attrs: ClothAttributes, resolution: int) -> int:
    return int(round(attrs.total_length * px_per_cm(resolution)))


def natural_widths(attrs: ClothAttributes, resolution: int) -> np.ndarray:
    """Pattern width (px) of the torso panel for each row below the shoulder line."""
    s = px_per_cm(resolution)
    n = garment_length_px(attrs, resolution)
    base = attrs.chest_circumference / 2 * s
    band = int(round(CHEST_BAND_CM * s))
    d = np.arange(n, dtype=np.float64)
    frac = np.clip((d - band) / max(n - band, 1), 0.0, None)
    return base * (1.0 + FLARE[attrs.cloth_type.label] * frac)


def _sleeve_half_width(attrs: ClothAttributes, s: float) -> float:
    return 0.06 * attrs.chest_circumference * s


def _neck_cut(attrs: ClothAttributes, s: float, d, x) -> np.ndarray:
    """Neckline opening; ``d`` rows below the garment top, ``x`` columns from centre."""
    chest = attrs.chest_circumference
    kind = attrs.cloth_type
    if kind == ClothType.BLAZER:
        depth = 0.45 * attrs.total_length * s
        return (d < depth) & (np.abs(x) <= 0.1 * chest * s * (1 - d / depth))
    if kind == ClothType.DRESS:
        ax, ay = 0.12 * chest * s, 12.0 * s
    else:
        ax, ay = 0.09 * chest * s, 0.055 * chest * s
    return (x / ax) ** 2 + (d / ay) ** 2 <= 1.0


def _fill_rows(out: np.ndarray, top: int, widths: np.ndarray) -> None:
    res = out.shape[1]
    for d, w in enumerate(widths):
        w = int(min(w, res))
        c0 = (res - w) // 2
        out[top + d, c0:c0 + w] = 1


def _garment(attrs: ClothAttributes, resolution: int, top: int, widths: np.ndarray,
             sleeve_roots: tuple[tuple[float, float], tuple[float, float]]) -> np.ndarray:
    s = px_per_cm(resolution)
    n = len(widths)
    mask = np.zeros((resolution, resolution), dtype=np.uint8)
    _fill_rows(mask, top, np.round(widths).astype(int))
    rows, cols = _grid(resolution)
    cut = _neck_cut(attrs, s, rows - top, cols) & (rows >= top)
    mask[cut] = 0
    length = attrs.sleeve_length * s
    if length > 0:
        hw = _sleeve_half_width(attrs, s)
        for side, root in zip((-1, 1), sleeve_roots):
            mask[_strip(rows, cols, root, BodyGeometry.arm_direction(side), length, hw)] = 1
    mask[:top] = 0
    mask[top + n:] = 0
    return mask


def generate_cloth_mask(attrs: ClothAttributes, resolution: int) -> np.ndarray:
    """Lay-flat garment silhouette, vertically centred in the frame."""
    check_resolution(resolution)
    attrs.validate()
    s = px_per_cm(resolution)
    n = garment_length_px(attrs, resolution)
    if n > resolution:
        raise ValidationError("total_length", f"{attrs.total_length} cm exceeds the {FRAME_CM:g} cm frame")
    widths = natural_widths(attrs, resolution)
    if widths.max() > resolution:
        raise ValidationError("chest_circumference", "garment wider than the frame")
    hw = _sleeve_half_width(attrs, s)
    inset = hw * math.sin(ARM_ANGLE)
    reach = widths[0] / 2 - inset + attrs.sleeve_length * s * math.sin(ARM_ANGLE) + hw
    if attrs.sleeve_length > 0 and reach > resolution / 2:
        raise ValidationError("sleeve_length", "sleeves extend beyond the frame")
    top = (resolution - n) // 2
    roots = tuple((side * (widths[0] / 2 - inset), top + inset) for side in (-1, 1))
    return _garment(attrs, resolution, top, widths, roots)


def drape(user_mask: np.ndarray, cloth_attrs: ClothAttributes, human_attrs: HumanAttributes) -> TwoChannelMask:
    """Hang the garment on the silhouette and split the result into body/cloth channels."""
    user_mask = np.asarray(user_mask)
    if user_mask.ndim != 2 or user_mask.shape[0] != user_mask.shape[1]:
        raise ShapeError(f"user mask must be square 2-D, got {user_mask.shape}")
    resolution = user_mask.shape[0]
    check_resolution(resolution)
    cloth_attrs.validate()
    geo = BodyGeometry.from_attrs(human_attrs, resolution)
    n = garment_length_px(cloth_attrs, resolution)
    top = geo.shoulder_row
    if top + n > resolution:
        raise ValidationError("total_length", f"{cloth_attrs.total_length} cm hangs below the frame")

    user = user_mask >= 0.5
    rows, cols = _grid(resolution)
    core = user & ~geo.arms(rows, cols, pad=1.0)
    e = ease_px(resolution)
    natural = np.round(natural_widths(cloth_attrs, resolution)).astype(int)
    widths = np.empty(n, dtype=int)
    for d in range(n):
        filled = np.flatnonzero(core[top + d])
        body_w = filled[-1] - filled[0] + 1 if filled.size else 0
        widths[d] = max(body_w + 2 * e, natural[d])
    roots = (geo.arm_joint(-1), geo.arm_joint(1))
    cloth = _garment(cloth_attrs, resolution, top, widths, roots)
    body = (user & (cloth == 0)).astype(np.uint8)
    return TwoChannelMask(body, cloth)


def measure_length_px(cloth_channel: np.ndarray) -> int:
    """Rows from the topmost to the bottommost foreground row, inclusive (threshold 0.5)."""
    rows = np.flatnonzero((np.asarray(cloth_channel) >= 0.5).any(axis=1))
    if rows.size == 0:
        return 0
    return int(rows[-1] - rows[0] + 1)


# --------------------------------------------------------------------------- dataset


def allocate_counts(n: int, quotas: dict[str, dict[str, Any]]) -> list[tuple[str, str, int]]:
    """Split ``n`` over (group, type) cells by largest remainder.

    Every type listed under a group is one cell with that group's weight.
    Ties in the remainder go to the cell listed first.
    """
    cells = [(g, t, quota["weight"]) for g, quota in quotas.items() for t in quota["types"]]
    total = sum(w for _, _, w in cells)
    exact = [n * w / total for _, _, w in cells]
    counts = [int(math.floor(x)) for x in exact]
    order = sorted(range(len(cells)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return [(g, t, c) for (g, t, _), c in zip(cells, counts)]


def _assignments(config: GeneratorConfig, seed: int) -> list[tuple[str, str]]:
    slots = [(g, t) for g, t, c in allocate_counts(config.n, config.quotas) for _ in range(c)]
    perm = np.random.default_rng(derive_seed(seed, "assign")).permutation(len(slots))
    return [slots[i] for i in perm]


def split_of(config: GeneratorConfig, seed: int) -> list[str]:
    n_val = int(round(config.n * config.val_fraction))
    perm = np.random.default_rng(derive_seed(seed, "split")).permutation(config.n)
    labels = ["train"] * config.n
    for i in perm[:n_val]:
        labels[int(i)] = "val"
    return labels


def sample_id_for(index: int) -> str:
    return f"s{index:06d}"


def generate_sample(index: int, seed: int, config: GeneratorConfig,
                    assignments: list[tuple[str, str]] | None = None) -> Sample:
    """Pure function of (index, seed, config)."""
    if assignments is None:
        assignments = _assignments(config, seed)
    group, type_name = assignments[index]
    sid = sample_id_for(index)
    sample_seed = derive_seed(seed, "sample", sid)
    rng = np.random.default_rng(sample_seed)
    human = HumanAttributes(float(rng.uniform(*config.height_range)), float(rng.uniform(*config.weight_range)))
    cloth = sample_attributes(type_name, derive_seed(sample_seed, "cloth"), config.ranges)
    res = config.resolution
    user = generate_human_mask(human, res, height_range=config.height_range, weight_range=config.weight_range)
    return Sample(
        user_mask=user,
        cloth_mask=generate_cloth_mask(cloth, res),
        clothed=drape(user, cloth, human),
        cloth_attrs=cloth,
        human_attrs=human,
        sample_id=sid,
        seed=sample_seed,
        group=group,
    )


def iter_samples(config: GeneratorConfig, seed: int) -> Iterator[Sample]:
    assignments = _assignments(config, seed)
    for i in range(config.n):
        yield generate_sample(i, seed, config, assignments)


@dataclass
class DatasetManifest:
    root: Path
    header: dict[str, Any]
    records: list[dict[str, Any]] = field(default_factory=list)

    @property
    def resolution(self) -> int:
        return int(self.header["config"]["resolution"])

    def split(self, name: str) -> list[dict[str, Any]]:
        return [r for r in self.records if r["split"] == name]

    def path(self, record: dict[str, Any], kind: str) -> Path:
        return self.root / record["files"][kind]

    def digest(self) -> str:
        return hashlib.sha256((self.root / MANIFEST_NAME).read_bytes()).hexdigest()


def write_mask(path: Path, mask: np.ndarray) -> None:
    img = Image.fromarray((np.asarray(mask) >= 0.5).astype(np.uint8) * 255, mode="L")
    try:
        img.save(path, format="PNG")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def read_mask(path: str | os.PathLike) -> np.ndarray:
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read mask {path}: {exc}") from exc
    return (arr >= 128).astype(np.uint8)


def build_dataset(config: GeneratorConfig, seed: int, out_dir: str | os.PathLike) -> DatasetManifest:
    """Render ``config.n`` samples under ``out_dir`` and write the manifest last."""
    config.validate()
    out = Path(out_dir)
    masks = out / "masks"
    try:
        masks.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {masks}: {exc}") from exc

    splits = split_of(config, seed)
    header = {
        "record": "header",
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "seed": seed,
        "config": to_dict(config),
        "split": {"method": "seeded permutation", "val_fraction": config.val_fraction,
                  "n_train": splits.count("train"), "n_val": splits.count("val")},
    }
    manifest = DatasetManifest(out, header)
    for sample in iter_samples(config, seed):
        files = {}
        arrays = (sample.user_mask, sample.cloth_mask, sample.clothed.body, sample.clothed.cloth)
        for kind, arr in zip(MASK_SUFFIXES, arrays):
            rel = f"masks/{sample.sample_id}_{kind}.png"
            write_mask(out / rel, arr)
            files[kind] = rel
        manifest.records.append({
            "record": "sample",
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "sample_id": sample.sample_id,
            "seed": sample.seed,
            "split": splits[int(sample.sample_id[1:])],
            "group": sample.group,
            "cloth": sample.cloth_attrs.to_json(),
            "human": sample.human_attrs.to_json(),
            "files": files,
        })
    path = out / MANIFEST_NAME
    lines = [json.dumps(header, sort_keys=True)] + [json.dumps(r, sort_keys=True) for r in manifest.records]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    log.info("wrote %d samples to %s", len(manifest.records), out)
    return manifest


def read_manifest(root: str | os.PathLike) -> DatasetManifest:
    root = Path(root)
    path = root / MANIFEST_NAME
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    if not lines:
        raise DataError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
        records = [json.loads(line) for line in lines[1:] if line.strip()]
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed record: {exc}") from exc
    if header.get("record") != "header" or header.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported manifest schema {header.get('schema_version')!r}")
    return DatasetManifest(root, header, records)


def generator_config_from_manifest(manifest: DatasetManifest) -> GeneratorConfig:
    return GeneratorConfig(**manifest.header["config"])

