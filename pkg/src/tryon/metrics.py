"""Mask metrics: F1, IoU and cloth length error, with report aggregation."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from tryon.errors import DataError, ShapeError, ValidationError
from tryon.synthgen import TwoChannelMask, measure_length_px, px_per_cm

REPORT_SCHEMA_VERSION = 1
THRESHOLD = 0.5


def binarize(mask) -> np.ndarray:
    """Foreground is everything >= 0.5 (ties count as foreground)."""
    return np.asarray(mask) >= THRESHOLD


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p, t = binarize(pred), binarize(truth)
    if p.shape != t.shape:
        raise ShapeError(f"mask shapes differ: {p.shape} vs {t.shape}")
    return p, t


def iou(pred, truth) -> float:
    p, t = _pair(pred, truth)
    union = np.count_nonzero(p | t)
    if union == 0:
        return 1.0
    return np.count_nonzero(p & t) / union


def f1(pred, truth) -> float:
    p, t = _pair(pred, truth)
    denom = np.count_nonzero(p) + np.count_nonzero(t)
    if denom == 0:
        return 1.0
    return 2.0 * np.count_nonzero(p & t) / denom


def _cloth(mask) -> np.ndarray:
    if isinstance(mask, TwoChannelMask):
        return mask.cloth
    arr = np.asarray(mask)
    if arr.ndim != 3 or arr.shape[0] != 2:
        raise ShapeError(f"expected a two-channel mask, got shape {arr.shape}")
    return arr[1]


def average_length_error(preds: Sequence, truths: Sequence) -> float:
    """Mean absolute difference of cloth-channel lengths in pixels."""
    if len(preds) != len(truths):
        raise ValidationError("preds", f"{len(preds)} predictions for {len(truths)} targets")
    if not preds:
        raise ValidationError("preds", "cannot average over an empty list")
    errs = [abs(measure_length_px(_cloth(p)) - measure_length_px(_cloth(t))) for p, t in zip(preds, truths)]
    return float(np.mean(errs))


@dataclass
class EvalReport:
    f1: float
    iou: float
    avg_length_error_px: float
    n_samples: int
    resolution: int
    avg_length_error_cm: float
    per_channel: dict[str, dict[str, float]]
    records: list[dict] = field(default_factory=list)
    label: str = ""
    extra: dict = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_json(self) -> dict:
        return asdict(self)

    def save(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise DataError(f"cannot write report {path}: {exc}") from exc
        return path

    @classmethod
    def load(cls, path: str | os.PathLike) -> "EvalReport":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read report {path}: {exc}") from exc
        if d.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise DataError(f"{path}: unsupported report schema {d.get('schema_version')!r}")
        return cls(**d)


def evaluate_masks(preds: Sequence, truths: Sequence, sample_ids: Sequence[str], label: str = "") -> EvalReport:
    """Score predicted two-channel masks against ground truth.

    Headline F1/IoU use the union of both channels (the whole clothed
    figure); per-channel scores are reported alongside.  Length error uses
    the cloth channel.
    """
    if not preds:
        raise ValidationError("preds", "nothing to evaluate")
    if not (len(preds) == len(truths) == len(sample_ids)):
        raise ValidationError("preds", "predictions, targets and ids differ in length")
    records = []
    for sid, pred, truth in zip(sample_ids, preds, truths):
        try:
            p = np.asarray(pred.stack() if isinstance(pred, TwoChannelMask) else pred)
            t = np.asarray(truth.stack() if isinstance(truth, TwoChannelMask) else truth)
            pb, tb = binarize(p), binarize(t)
            union_p, union_t = pb[0] | pb[1], tb[0] | tb[1]
            lp, lt = measure_length_px(pb[1]), measure_length_px(tb[1])
            records.append({
                "sample_id": sid,
                "f1": f1(union_p, union_t),
                "iou": iou(union_p, union_t),
                "f1_body": f1(pb[0], tb[0]),
                "iou_body": iou(pb[0], tb[0]),
                "f1_cloth": f1(pb[1], tb[1]),
                "iou_cloth": iou(pb[1], tb[1]),
                "length_pred_px": lp,
                "length_true_px": lt,
                "length_error_px": float(abs(lp - lt)),
            })
        except (ShapeError, IndexError, ValueError) as exc:
            raise DataError(f"sample {sid}: {exc}") from exc
    resolution = int(np.asarray(truths[0].stack() if isinstance(truths[0], TwoChannelMask) else truths[0]).shape[-1])

    def mean(key):
        return float(np.mean([r[key] for r in records]))

    length_px = mean("length_error_px")
    return EvalReport(
        f1=mean("f1"),
        iou=mean("iou"),
        avg_length_error_px=length_px,
        n_samples=len(records),
        resolution=resolution,
        avg_length_error_cm=length_px / px_per_cm(resolution),
        per_channel={"body": {"f1": mean("f1_body"), "iou": mean("iou_body")},
                     "cloth": {"f1": mean("f1_cloth"), "iou": mean("iou_cloth")}},
        records=records,
        label=label,
    )


def evaluate(model_checkpoint, dataset_split, split: str = "val", label: str = "") -> EvalReport:
    """Run the try-on generator over a dataset split and score it."""
    from tryon.agvton import predict_split

    preds, data = predict_split(model_checkpoint, dataset_split, split)
    report = evaluate_masks(list(preds.numpy()), list(data.clothed.numpy()), data.ids, label=label)
    report.extra["split"] = split
    return report


def format_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text table in the style of the ablation comparison."""
    head = f"{'':<12}| {'F1':>8} | {'IoU':>8} | {'Avg length err (px)':>20} | {'(cm)':>7}"
    lines = [head, "-" * len(head)]
    for r in reports:
        lines.append(f"{r.label or '-':<12}| {r.f1:8.4f} | {r.iou:8.4f} | {r.avg_length_error_px:20.4f} | "
                     f"{r.avg_length_error_cm:7.3f}")
    lines.append(f"resolution {reports[0].resolution}px, n={reports[0].n_samples}")
    return "\n".join(lines)
