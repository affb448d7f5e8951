"""Convolutional auto-encoder over binary cloth masks.

The encoder's output is the cloth feature map fed into the try-on
generator: four conv + max-pool stages take a R x R mask to a
(R/16) x (R/16) x 256 grid.
"""

from __future__ import annotations

import logging

import torch
import torch.nn as nn

from tryon.checkpoint import Checkpoint
from tryon.config import TrainConfig, derive_seed, to_dict
from tryon.data import load_split
from tryon.errors import ShapeError, ValidationError
from tryon.synthgen import DatasetManifest, read_manifest
from tryon.training import fit, loss_decreased, seed_everything

log = logging.getLogger(__name__)

ENCODER_WIDTHS = (16, 32, 64, 256)
FEATURE_CHANNELS = ENCODER_WIDTHS[-1]
BCE_EPS = 1e-7


def check_mask_batch(x: torch.Tensor, channels: int, name: str = "mask") -> None:
    if x.dim() != 4 or x.shape[1] != channels:
        raise ShapeError(f"{name} must be (N, {channels}, R, R), got {tuple(x.shape)}")
    h, w = x.shape[-2:]
    if h != w or h % 16 or h == 0:
        raise ShapeError(f"{name} resolution must be square and divisible by 16, got {h}x{w}")


class ClothEncoder(nn.Module):
    def __init__(self, widths=ENCODER_WIDTHS):
        super().__init__()
        layers, c = [], 1
        for w in widths:
            layers += [nn.Conv2d(c, w, 3, padding=1), nn.ReLU(inplace=True), nn.MaxPool2d(2)]
            c = w
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        check_mask_batch(x, 1, "cloth mask")
        return self.net(x)


class ClothDecoder(nn.Module):
    def __init__(self, widths=ENCODER_WIDTHS):
        super().__init__()
        chans = list(reversed(widths))[1:] + [1]   # 256 -> 64 -> 32 -> 16 -> 1
        layers, c = [], widths[-1]
        for i, w in enumerate(chans):
            layers += [nn.Upsample(scale_factor=2, mode="nearest"), nn.Conv2d(c, w, 3, padding=1)]
            layers.append(nn.ReLU(inplace=True) if i < len(chans) - 1 else nn.Sigmoid())
            c = w
        self.net = nn.Sequential(*layers)
        self.in_channels = widths[-1]

    def forward(self, z):
        if z.dim() != 4 or z.shape[1] != self.in_channels or z.shape[-1] != z.shape[-2]:
            raise ShapeError(f"feature map must be (N, {self.in_channels}, r, r), got {tuple(z.shape)}")
        return self.net(z)


class ClothAutoencoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.encoder = ClothEncoder()
        self.decoder = ClothDecoder()

    def encode(self, x):
        return self.encoder(x)

    def decode(self, z):
        return self.decoder(z)

    def forward(self, x):
        return self.decoder(self.encoder(x))


def bce_loss(prediction: torch.Tensor, target: torch.Tensor, eps: float = BCE_EPS) -> torch.Tensor:
    """Mean of -[q log p + (1 - q) log(1 - p)] with p clamped to [eps, 1 - eps]."""
    if prediction.shape != target.shape:
        raise ShapeError(f"prediction {tuple(prediction.shape)} and target {tuple(target.shape)} differ")
    p = prediction.clamp(eps, 1.0 - eps)
    q = target.to(p.dtype)
    return -(q * torch.log(p) + (1 - q) * torch.log(1 - p)).mean()


def train_autoencoder(dataset: str | DatasetManifest, config: TrainConfig) -> Checkpoint:
    config.validate()
    manifest = dataset if isinstance(dataset, DatasetManifest) else read_manifest(dataset)
    try:
        data = load_split(manifest, "train", config.resolution)
    except ValidationError as exc:
        raise ValidationError("dataset", f"no training samples: {exc}") from exc
    seed = derive_seed(config.seed, "ae")
    gen = seed_everything(seed)
    model = ClothAutoencoder()
    masks = data.cloth

    def batch_loss(idx):
        x = masks[idx].float()
        return bce_loss(model(x), x), {}

    history = fit(model, batch_loss, len(data), config, gen, "ae")
    return Checkpoint(
        stage="ae",
        state_dict={k: v.detach().clone() for k, v in model.state_dict().items()},
        config=to_dict(config),
        seed=seed,
        history=history,
        metadata={"dataset_digest": manifest.digest(), "n_train": len(data),
                  "loss_decreased": loss_decreased(history)},
    )


def load_autoencoder(ckpt: Checkpoint) -> ClothAutoencoder:
    model = ClothAutoencoder()
    model.load_state_dict(ckpt.state_dict)
    return model.eval()


@torch.no_grad()
def reconstruct(model: ClothAutoencoder, masks: torch.Tensor, batch_size: int = 32) -> torch.Tensor:
    model.eval()
    out = [model(masks[i:i + batch_size].float()) for i in range(0, len(masks), batch_size)]
    return torch.cat(out)


def evaluate_reconstruction(ckpt: Checkpoint, dataset: str | DatasetManifest, split: str = "val") -> dict:
    """Mean IoU / F1 of thresholded reconstructions against the input masks."""
    from tryon.metrics import f1, iou

    data = load_split(dataset, split, ckpt.config["resolution"])
    recon = reconstruct(load_autoencoder(ckpt), data.cloth)
    preds = (recon >= 0.5).numpy()[:, 0]
    truths = data.cloth.numpy()[:, 0]
    ious = [iou(p, t) for p, t in zip(preds, truths)]
    f1s = [f1(p, t) for p, t in zip(preds, truths)]
    bce = bce_loss(recon, data.cloth.float()).item()
    return {"stage": "ae", "split": split, "n_samples": len(ious), "iou": sum(ious) / len(ious),
            "f1": sum(f1s) / len(f1s), "bce": bce}

