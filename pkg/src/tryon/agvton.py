"""Attribute-guided U-Net that predicts the clothed-human two-channel mask.

Inputs are the user silhouette, the cloth mask and the cloth/human
attributes.  The U-Net encodes only the user silhouette; the cloth enters
through the frozen auto-encoder's feature map, and the attributes through
an MLP whose output is reshaped to a spatial grid.  The three are
concatenated at the bottleneck and fused by a 1x1 convolution.

During training a frozen attribute classifier reads the predicted mask and
its type / size errors are added to the Dice loss.
"""

from __future__ import annotations

import dataclasses
import logging
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from tryon.attr_clf import AttributeClassifier, cross_entropy, load_classifier, mean_absolute_error
from tryon.checkpoint import Checkpoint, weights_digest
from tryon.cloth_ae import FEATURE_CHANNELS, ClothEncoder, check_mask_batch, load_autoencoder
from tryon.config import CLOTH_TYPE_NAMES, VtonConfig, derive_seed, to_dict, train_config_from_dict
from tryon.data import AttributeScaler, MaskDataset, attrs_to_tensors, downsample_mask, load_split, scaler_for
from tryon.errors import ConfigError, DataError, ShapeError, StageOrderError
from tryon.synthgen import (
    ClothAttributes,
    DatasetManifest,
    HumanAttributes,
    TwoChannelMask,
    generate_cloth_mask,
    generator_config_from_manifest,
    read_manifest,
    sample_attributes,
)
from tryon.training import fit, freeze, is_frozen, loss_decreased, seed_everything

log = logging.getLogger(__name__)

UNET_WIDTHS = (32, 64, 128, 256)
ATTR_DIM = len(CLOTH_TYPE_NAMES) + 3 + 2
DICE_SMOOTH = 1e-6


def attribute_vector(types: torch.Tensor, sizes_cm: torch.Tensor, human: torch.Tensor,
                     scaler: AttributeScaler) -> torch.Tensor:
    """one-hot type (4) ++ normalized sizes (3) ++ normalized height, weight (2)."""
    onehot = F.one_hot(types.long(), len(CLOTH_TYPE_NAMES)).float()
    return torch.cat([onehot, scaler.norm_sizes(sizes_cm.float()), scaler.norm_human(human.float())], dim=1)


class AttributeMLP(nn.Module):
    def __init__(self, resolution: int, channels: int = 32, hidden: int = 128):
        super().__init__()
        self.grid = resolution // 16
        self.channels = channels
        self.net = nn.Sequential(
            nn.Linear(ATTR_DIM, hidden), nn.ReLU(inplace=True),
            nn.Linear(hidden, hidden), nn.ReLU(inplace=True),
            nn.Linear(hidden, self.grid * self.grid * channels),
        )

    def forward(self, attrs):
        if attrs.dim() != 2 or attrs.shape[1] != ATTR_DIM:
            raise ShapeError(f"attribute vector must be (N, {ATTR_DIM}), got {tuple(attrs.shape)}")
        return self.net(attrs).view(-1, self.channels, self.grid, self.grid)


def _conv_block(cin, cout):
    return nn.Sequential(nn.Conv2d(cin, cout, 3, padding=1, bias=False), nn.BatchNorm2d(cout), nn.ReLU(inplace=True))


class TryOnGenerator(nn.Module):
    def __init__(self, resolution: int, attr_channels: int = 32, widths=UNET_WIDTHS):
        super().__init__()
        if resolution % 16:
            raise ShapeError(f"resolution must be divisible by 16, got {resolution}")
        self.resolution = resolution
        self.attr_mlp = AttributeMLP(resolution, attr_channels)
        self.down = nn.ModuleList()
        c = 1
        for w in widths:
            self.down.append(_conv_block(c, w))
            c = w
        self.fuse = nn.Sequential(nn.Conv2d(c + FEATURE_CHANNELS + attr_channels, c, 1, bias=False),
                                  nn.BatchNorm2d(c), nn.ReLU(inplace=True))
        self.up = nn.ModuleList()
        for skip in reversed(widths):
            out = max(skip // 2, widths[0])
            self.up.append(_conv_block(c + skip, out))
            c = out
        self.head = nn.Conv2d(c, 2, 1)

    def attribute_features(self, attrs):
        return self.attr_mlp(attrs)

    def forward(self, user, cloth_features, attrs):
        check_mask_batch(user, 1, "user mask")
        if user.shape[-1] != self.resolution:
            raise ShapeError(f"generator built for {self.resolution}px, got {user.shape[-1]}px")
        skips, x = [], user
        for block in self.down:
            x = block(x)
            skips.append(x)
            x = F.max_pool2d(x, 2)
        if cloth_features.shape[-2:] != x.shape[-2:]:
            raise ShapeError(f"cloth features {tuple(cloth_features.shape)} do not match bottleneck {tuple(x.shape)}")
        x = self.fuse(torch.cat([x, cloth_features, self.attr_mlp(attrs)], dim=1))
        for block in self.up:
            x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = block(torch.cat([x, skips.pop()], dim=1))
        return torch.sigmoid(self.head(x))


def attribute_features(generator: TryOnGenerator, cloth_attrs: ClothAttributes, human_attrs: HumanAttributes,
                       scaler: AttributeScaler) -> torch.Tensor:
    """Attribute grid (C_attr, R/16, R/16) for one attribute pair."""
    types, sizes, human = attrs_to_tensors([cloth_attrs], [human_attrs])
    with torch.no_grad():
        return generator.attribute_features(attribute_vector(types, sizes, human, scaler))[0]


def dice_loss(prediction: torch.Tensor, target: torch.Tensor, smooth: float = DICE_SMOOTH,
              denominator: str = "sum") -> torch.Tensor:
    """Soft Dice per sample and channel, averaged.

    ``denominator="product"`` uses Σp·Σq instead of Σp + Σq; that form is
    not zero for a perfect prediction and exists only for comparison.
    """
    if prediction.shape != target.shape:
        raise ShapeError(f"prediction {tuple(prediction.shape)} and target {tuple(target.shape)} differ")
    if prediction.dim() == 3:
        prediction, target = prediction.unsqueeze(0), target.unsqueeze(0)
    p = prediction.flatten(2)
    q = target.to(p.dtype).flatten(2)
    inter = (p * q).sum(-1)
    if denominator == "sum":
        denom = p.sum(-1) + q.sum(-1)
    elif denominator == "product":
        denom = p.sum(-1) * q.sum(-1)
    else:
        raise ConfigError(f"unknown dice denominator {denominator!r}")
    return (1 - 2 * inter / (denom + smooth)).mean()


def vton_loss(prediction: torch.Tensor, target: torch.Tensor, true_types: torch.Tensor, true_sizes: torch.Tensor,
              human_unit: torch.Tensor, classifier: AttributeClassifier | None, weights=(1.0, 0.1, 0.1),
              dice_denominator: str = "sum") -> tuple[torch.Tensor, dict[str, float]]:
    """alpha * Dice + beta * CE + gamma * MAE, the last two read off the frozen classifier.

    ``true_sizes`` must be in the classifier's size units (normalized when
    called from training).  With beta = gamma = 0 the classifier is not run.
    """
    alpha, beta, gamma = weights
    dice = dice_loss(prediction, target, denominator=dice_denominator)
    parts = {"dice": dice.item()}
    total = alpha * dice
    if beta == 0 and gamma == 0:
        return total, parts
    if classifier is None:
        raise ConfigError("classifier guidance requested but no classifier given")
    if not is_frozen(classifier):
        raise ConfigError("attribute classifier must be frozen (eval mode, requires_grad=False)")
    probs, sizes = classifier(prediction, human_unit)
    ce = cross_entropy(probs, true_types)
    mae = mean_absolute_error(sizes, true_sizes)
    parts.update(ce=ce.item(), mae=mae.item())
    return total + beta * ce + gamma * mae, parts


def _load_prerequisite(path, stage: str, command: str) -> Checkpoint:
    if path is None or not Path(path).is_file():
        raise StageOrderError(command, f"missing {stage} checkpoint {path!s}; run `{command}` first")
    return Checkpoint.load(path, expect_stage=stage)


@torch.no_grad()
def encode_cloth(encoder: ClothEncoder, masks: torch.Tensor, batch_size: int = 64) -> torch.Tensor:
    return torch.cat([encoder(masks[i:i + batch_size].float()) for i in range(0, len(masks), batch_size)])


def resized_cloth_masks(manifest: DatasetManifest, data: MaskDataset, seed: int) -> torch.Tensor:
    """The same garment type at freshly sampled sizes, one mask per training item.

    The lay-flat mask of a garment already shows its exact size, so a generator
    that only ever sees matching pairs can ignore the size attributes.  Mixing
    in masks of the garment at other sizes, while keeping the target drape
    fixed, makes the attribute vector the reliable source of size.
    """
    gen_cfg = generator_config_from_manifest(manifest)
    factor = manifest.resolution // data.resolution
    masks = []
    for sid, attrs in zip(data.ids, data.cloth_attrs):
        other = sample_attributes(attrs.cloth_type, derive_seed(seed, "resize", sid), gen_cfg.ranges)
        masks.append(downsample_mask(generate_cloth_mask(other, manifest.resolution), factor))
    return torch.from_numpy(np.stack(masks)[:, None])


def train_agvton(dataset: str | DatasetManifest, config: VtonConfig) -> Checkpoint:
    """Train the generator against the frozen auto-encoder and classifier."""
    config.validate()
    ae_ckpt = _load_prerequisite(config.ae_checkpoint, "ae", "train-ae")
    ac_ckpt = _load_prerequisite(config.ac_checkpoint, "ac", "train-ac")
    manifest = dataset if isinstance(dataset, DatasetManifest) else read_manifest(dataset)
    data = load_split(manifest, "train", config.resolution)
    scaler = scaler_for(manifest)

    encoder = freeze(load_autoencoder(ae_ckpt).encoder)
    classifier, clf_scaler = load_classifier(ac_ckpt)
    classifier = freeze(classifier)
    digests_before = {"ae": weights_digest(encoder.state_dict()), "ac": weights_digest(classifier.state_dict())}

    seed = derive_seed(config.seed, "vton")
    gen = seed_everything(seed)
    model = TryOnGenerator(config.resolution, config.attr_channels)
    cloth_feats = encode_cloth(encoder, data.cloth)
    resized_feats = None
    if config.cloth_jitter > 0:
        resized_feats = encode_cloth(encoder, resized_cloth_masks(manifest, data, seed))
    attrs = attribute_vector(data.types, data.sizes, data.human, scaler)
    human_unit = clf_scaler.norm_human(data.human)
    sizes_unit = clf_scaler.norm_sizes(data.sizes)
    weights = (config.alpha, config.beta, config.gamma)

    def batch_loss(idx):
        feats = cloth_feats[idx]
        if resized_feats is not None:
            swap = torch.rand(len(idx), generator=gen) < config.cloth_jitter
            feats = torch.where(swap.view(-1, 1, 1, 1), resized_feats[idx], feats)
        pred = model(data.user[idx].float(), feats, attrs[idx])
        target = data.clothed[idx]
        loss, parts = vton_loss(pred, target, data.types[idx], sizes_unit[idx], human_unit[idx], classifier,
                                weights, config.dice_denominator)
        if "ce" not in parts:
            # guidance is off; still track the classifier's view of the prediction
            with torch.no_grad():
                probs, sizes = classifier(pred.detach(), human_unit[idx])
                parts.update(ce=cross_entropy(probs, data.types[idx]).item(),
                             mae=mean_absolute_error(sizes, sizes_unit[idx]).item())
        return loss, parts

    history = fit(model, batch_loss, len(data), config, gen, "vton", params=model.parameters())
    digests_after = {"ae": weights_digest(encoder.state_dict()), "ac": weights_digest(classifier.state_dict())}
    if digests_after != digests_before:
        raise ConfigError("frozen auto-encoder or classifier weights changed during training")
    return Checkpoint(
        stage="vton",
        state_dict={k: v.detach().clone() for k, v in model.state_dict().items()},
        config={**to_dict(config), "scaler": scaler.to_dict()},
        seed=seed,
        history=history,
        metadata={
            "dataset_digest": manifest.digest(),
            "n_train": len(data),
            "loss_decreased": loss_decreased(history),
            "frozen_digests": digests_before,
            "ae_checkpoint_digest": ae_ckpt.digest(),
            "ac_checkpoint_digest": ac_ckpt.digest(),
            "ac_config": ac_ckpt.config,
            "with_classifier": config.beta > 0 or config.gamma > 0,
        },
        frozen={"ae_encoder": {k: v.clone() for k, v in encoder.state_dict().items()},
                "ac": {k: v.clone() for k, v in classifier.state_dict().items()}},
    )


def ablate_without_classifier(dataset: str | DatasetManifest, config: VtonConfig) -> Checkpoint:
    """The same run with the classifier terms switched off (beta = gamma = 0)."""
    return train_agvton(dataset, dataclasses.replace(config, beta=0.0, gamma=0.0))


@dataclasses.dataclass
class TryOnModel:
    generator: TryOnGenerator
    encoder: ClothEncoder
    classifier: AttributeClassifier
    scaler: AttributeScaler
    classifier_scaler: AttributeScaler

    @property
    def resolution(self) -> int:
        return self.generator.resolution


def load_vton(ckpt: Checkpoint | str | Path) -> TryOnModel:
    if not isinstance(ckpt, Checkpoint):
        ckpt = Checkpoint.load(ckpt, expect_stage="vton")
    if ckpt.stage != "vton":
        raise DataError(f"expected a vton checkpoint, got {ckpt.stage!r}")
    cfg = train_config_from_dict({k: v for k, v in ckpt.config.items() if k != "scaler"}, VtonConfig)
    generator = TryOnGenerator(cfg.resolution, cfg.attr_channels)
    generator.load_state_dict(ckpt.state_dict)
    encoder = ClothEncoder()
    encoder.load_state_dict(ckpt.frozen["ae_encoder"])
    ac_config = ckpt.metadata["ac_config"]
    classifier = AttributeClassifier(ac_config.get("backbone", "reduced"))
    classifier.load_state_dict(ckpt.frozen["ac"])
    return TryOnModel(generator.eval(), freeze(encoder), freeze(classifier),
                      AttributeScaler.from_dict(ckpt.config["scaler"]),
                      AttributeScaler.from_dict(ac_config["scaler"]))


@torch.no_grad()
def generate(model: TryOnModel, user: torch.Tensor, cloth: torch.Tensor, attrs: torch.Tensor,
             batch_size: int = 32) -> torch.Tensor:
    if user.shape != cloth.shape:
        raise ShapeError(f"resolution mismatch: user mask {tuple(user.shape[-2:])}, cloth mask {tuple(cloth.shape[-2:])}")
    model.generator.eval()
    out = []
    for i in range(0, len(user), batch_size):
        feats = model.encoder(cloth[i:i + batch_size].float())
        out.append(model.generator(user[i:i + batch_size].float(), feats, attrs[i:i + batch_size]))
    return torch.cat(out)


def synthesize(model: TryOnModel | None, user_mask: np.ndarray, cloth_mask: np.ndarray,
               cloth_attrs: ClothAttributes, human_attrs: HumanAttributes) -> TwoChannelMask:
    """Predicted (body, cloth) probabilities for one user/garment pair."""
    if model is None or model.encoder is None:
        raise ConfigError("synthesize needs a loaded model with its frozen cloth encoder")
    user_mask, cloth_mask = np.asarray(user_mask), np.asarray(cloth_mask)
    if user_mask.shape != cloth_mask.shape:
        raise ShapeError(f"resolution mismatch: user mask {user_mask.shape}, cloth mask {cloth_mask.shape}")
    if user_mask.shape != (model.resolution, model.resolution):
        raise ShapeError(f"resolution mismatch: model expects {model.resolution}px, masks are {user_mask.shape}")
    types, sizes, human = attrs_to_tensors([cloth_attrs], [human_attrs])
    attrs = attribute_vector(types, sizes, human, model.scaler)
    u = torch.from_numpy(user_mask.astype(np.float32))[None, None]
    c = torch.from_numpy(cloth_mask.astype(np.float32))[None, None]
    out = generate(model, u, c, attrs)[0].numpy()
    return TwoChannelMask(out[0], out[1])


@torch.no_grad()
def estimate_attributes(model: TryOnModel, clothed: torch.Tensor, human: torch.Tensor):
    """Frozen classifier's type probabilities and sizes (cm) for predicted masks."""
    probs, sizes = model.classifier(clothed.float(), model.classifier_scaler.norm_human(human))
    return probs, model.classifier_scaler.denorm_sizes(sizes)


def predict_split(ckpt, dataset, split: str = "val"):
    model = load_vton(ckpt)
    data = load_split(dataset, split, model.resolution)
    attrs = attribute_vector(data.types, data.sizes, data.human, model.scaler)
    return generate(model, data.user, data.cloth, attrs), data
