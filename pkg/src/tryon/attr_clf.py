"""Cloth-attribute classifier: garment type and sizes from a clothed-human mask.

The type head sees only the image features; the size head additionally
receives the normalized (height, weight) of the wearer.  Size outputs are
in normalized units inside the network and converted to cm by the
``AttributeScaler`` stored with the checkpoint.
"""

from __future__ import annotations

import logging

import numpy as np
import torch
import torch.nn as nn

from tryon.checkpoint import Checkpoint
from tryon.cloth_ae import check_mask_batch
from tryon.config import CLOTH_TYPE_NAMES, SIZE_NAMES, TrainConfig, derive_seed, to_dict
from tryon.data import AttributeScaler, load_split, scaler_for
from tryon.errors import ShapeError, ValidationError
from tryon.synthgen import DatasetManifest, read_manifest
from tryon.training import fit, loss_decreased, seed_everything

log = logging.getLogger(__name__)

FEATURE_DIM = 512
N_TYPES = len(CLOTH_TYPE_NAMES)
CE_EPS = 1e-7

BACKBONES = {
    # widths, residual blocks per stage, 7x7 stem with max-pool
    "reduced": ((32, 64, 128, 256), (1, 1, 1, 1), False),
    "resnet18": ((64, 128, 256, 512), (2, 2, 2, 2), True),
}


class BasicBlock(nn.Module):
    def __init__(self, cin, cout, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        self.relu = nn.ReLU(inplace=True)
        self.shortcut = nn.Identity()
        if stride != 1 or cin != cout:
            self.shortcut = nn.Sequential(nn.Conv2d(cin, cout, 1, stride=stride, bias=False), nn.BatchNorm2d(cout))

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.shortcut(x))


class ResidualBackbone(nn.Module):
    """Four residual stages then global average pooling, projected to 512 dims."""

    def __init__(self, variant="reduced", in_channels=2):
        super().__init__()
        widths, blocks, big_stem = BACKBONES[variant]
        if big_stem:
            self.stem = nn.Sequential(nn.Conv2d(in_channels, widths[0], 7, stride=2, padding=3, bias=False),
                                      nn.BatchNorm2d(widths[0]), nn.ReLU(inplace=True), nn.MaxPool2d(3, 2, 1))
        else:
            self.stem = nn.Sequential(nn.Conv2d(in_channels, widths[0], 3, stride=2, padding=1, bias=False),
                                      nn.BatchNorm2d(widths[0]), nn.ReLU(inplace=True))
        stages, c = [], widths[0]
        for i, (w, nb) in enumerate(zip(widths, blocks)):
            layers = [BasicBlock(c, w, stride=1 if i == 0 else 2)]
            layers += [BasicBlock(w, w) for _ in range(nb - 1)]
            stages.append(nn.Sequential(*layers))
            c = w
        self.stages = nn.Sequential(*stages)
        self.proj = nn.Identity() if c == FEATURE_DIM else nn.Sequential(nn.Linear(c, FEATURE_DIM), nn.ReLU(inplace=True))

    def forward(self, x):
        x = self.stages(self.stem(x)).mean((2, 3))
        return self.proj(x)


def _mlp(cin, hidden, cout):
    return nn.Sequential(nn.Linear(cin, hidden), nn.ReLU(inplace=True), nn.Linear(hidden, cout))


class AttributeClassifier(nn.Module):
    def __init__(self, backbone="reduced"):
        super().__init__()
        self.backbone = ResidualBackbone(backbone)
        self.type_head = _mlp(FEATURE_DIM, 128, N_TYPES)
        self.size_head = _mlp(FEATURE_DIM + 2, 128, len(SIZE_NAMES))

    def features(self, clothed):
        check_mask_batch(clothed, 2, "clothed-human mask")
        return self.backbone(clothed)

    def type_logits(self, features):
        return self.type_head(features)

    def sizes_unit(self, features, human_unit):
        if human_unit.dim() != 2 or human_unit.shape[1] != 2:
            raise ShapeError(f"human attributes must be (N, 2), got {tuple(human_unit.shape)}")
        return self.size_head(torch.cat([features, human_unit.to(features.dtype)], dim=1))

    def forward(self, clothed, human_unit):
        """Type probabilities and normalized size estimates."""
        f = self.features(clothed)
        return torch.softmax(self.type_logits(f), dim=1), self.sizes_unit(f, human_unit)


def extract_features(model: AttributeClassifier, clothed: torch.Tensor) -> torch.Tensor:
    return model.features(clothed)


def classify_type(model: AttributeClassifier, features: torch.Tensor) -> torch.Tensor:
    return torch.softmax(model.type_logits(features), dim=1)


def estimate_size(model: AttributeClassifier, features: torch.Tensor, human: torch.Tensor,
                  scaler: AttributeScaler) -> torch.Tensor:
    """Size estimates in cm; ``human`` holds raw (height cm, weight kg) rows."""
    return scaler.denorm_sizes(model.sizes_unit(features, scaler.norm_human(human)))


def cross_entropy(probs: torch.Tensor, target: torch.Tensor, eps: float = CE_EPS) -> torch.Tensor:
    """Mean -log p[target]; the true-class probability is clamped at ``eps``."""
    p = probs.gather(1, target.view(-1, 1)).squeeze(1)
    return -torch.log(p.clamp_min(eps)).mean()


def mean_absolute_error(pred: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
    if pred.shape != truth.shape:
        raise ShapeError(f"size prediction {tuple(pred.shape)} vs truth {tuple(truth.shape)}")
    return (pred - truth.to(pred.dtype)).abs().mean()


def ac_loss(pred_type: torch.Tensor, pred_size: torch.Tensor, true_type: torch.Tensor,
            true_size: torch.Tensor, lam: float = 1.0) -> torch.Tensor:
    """CE(type) + lam * MAE(sizes); sizes may be in any consistent unit."""
    if lam < 0:
        raise ValidationError("lambda", f"must be >= 0, got {lam}")
    return cross_entropy(pred_type, true_type) + lam * mean_absolute_error(pred_size, true_size)


def train_classifier(dataset: str | DatasetManifest, config: TrainConfig) -> Checkpoint:
    config.validate()
    manifest = dataset if isinstance(dataset, DatasetManifest) else read_manifest(dataset)
    data = load_split(manifest, "train", config.resolution)
    scaler = scaler_for(manifest)
    seed = derive_seed(config.seed, "ac")
    gen = seed_everything(seed)
    model = AttributeClassifier(config.backbone)
    human_unit = scaler.norm_human(data.human)
    size_unit = scaler.norm_sizes(data.sizes)

    def batch_loss(idx):
        probs, sizes = model(data.clothed[idx].float(), human_unit[idx])
        ce = cross_entropy(probs, data.types[idx])
        mae = mean_absolute_error(sizes, size_unit[idx])
        return ce + config.size_weight * mae, {"ce": ce.item(), "mae_unit": mae.item()}

    history = fit(model, batch_loss, len(data), config, gen, "ac")
    return Checkpoint(
        stage="ac",
        state_dict={k: v.detach().clone() for k, v in model.state_dict().items()},
        config={**to_dict(config), "scaler": scaler.to_dict()},
        seed=seed,
        history=history,
        metadata={"dataset_digest": manifest.digest(), "n_train": len(data),
                  "loss_decreased": loss_decreased(history)},
    )


def load_classifier(ckpt: Checkpoint) -> tuple[AttributeClassifier, AttributeScaler]:
    model = AttributeClassifier(ckpt.config.get("backbone", "reduced"))
    model.load_state_dict(ckpt.state_dict)
    return model.eval(), AttributeScaler.from_dict(ckpt.config["scaler"])


@torch.no_grad()
def predict_attributes(model: AttributeClassifier, scaler: AttributeScaler, clothed: torch.Tensor,
                       human: torch.Tensor, batch_size: int = 64) -> tuple[torch.Tensor, torch.Tensor]:
    """Type probabilities and sizes in cm for a batch of clothed masks."""
    model.eval()
    probs, sizes = [], []
    for i in range(0, len(clothed), batch_size):
        p, s = model(clothed[i:i + batch_size].float(), scaler.norm_human(human[i:i + batch_size]))
        probs.append(p)
        sizes.append(scaler.denorm_sizes(s))
    return torch.cat(probs), torch.cat(sizes)


def evaluate_classifier(ckpt: Checkpoint, dataset: str | DatasetManifest, split: str = "val") -> dict:
    data = load_split(dataset, split, ckpt.config["resolution"])
    model, scaler = load_classifier(ckpt)
    probs, sizes = predict_attributes(model, scaler, data.clothed, data.human)
    acc = (probs.argmax(1) == data.types).float().mean().item()
    mae = (sizes - data.sizes).abs().mean(0).numpy()
    confusion = np.zeros((N_TYPES, N_TYPES), dtype=int)
    for t, p in zip(data.types.tolist(), probs.argmax(1).tolist()):
        confusion[t, p] += 1
    return {
        "stage": "ac",
        "split": split,
        "n_samples": len(data),
        "type_accuracy": acc,
        "size_mae_cm": {name: float(v) for name, v in zip(SIZE_NAMES, mae)},
        "confusion": confusion.tolist(),
    }
