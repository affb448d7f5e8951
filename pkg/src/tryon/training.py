"""Training loop plumbing shared by the three stages."""

from __future__ import annotations

import logging
import math
from typing import Callable, Iterable

import torch

from tryon.config import TrainConfig
from tryon.errors import TrainingError

log = logging.getLogger(__name__)

BatchLoss = Callable[[torch.Tensor], tuple[torch.Tensor, dict[str, float]]]


def seed_everything(seed: int) -> torch.Generator:
    torch.manual_seed(seed)
    return torch.Generator().manual_seed(seed)


def make_optimizer(params: Iterable[torch.nn.Parameter], config: TrainConfig) -> torch.optim.Optimizer:
    if config.optimizer == "adam":
        return torch.optim.Adam(params, lr=config.lr)
    return torch.optim.SGD(params, lr=config.lr, momentum=0.9)


def fit(model: torch.nn.Module, batch_loss: BatchLoss, n_items: int, config: TrainConfig,
        generator: torch.Generator, stage: str, params=None) -> list[dict[str, float]]:
    """Run ``config.epochs`` epochs of shuffled minibatch training.

    ``batch_loss`` receives a tensor of item indices and returns the loss to
    back-propagate plus scalar components to log.  Returns one dict of
    item-weighted epoch means per epoch.
    """
    opt = make_optimizer(model.parameters() if params is None else params, config)
    sched = None
    if config.lr_schedule == "cosine":
        sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=config.epochs)
    history = []
    for epoch in range(1, config.epochs + 1):
        model.train()
        order = torch.randperm(n_items, generator=generator)
        sums: dict[str, float] = {}
        for start in range(0, n_items, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, parts = batch_loss(idx)
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"{stage}: non-finite loss {loss.item()} at epoch {epoch}, batch starting {start}; "
                    f"components={parts}")
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            parts = {"loss": loss.item(), **parts}
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + v * len(idx)
        record = {k: v / n_items for k, v in sums.items()}
        record["epoch"] = epoch
        record["lr"] = opt.param_groups[0]["lr"]
        if sched is not None:
            sched.step()
        history.append(record)
        log.info("%s epoch %d/%d %s", stage, epoch, config.epochs,
                 " ".join(f"{k}={v:.5f}" for k, v in record.items() if k != "epoch"))
    return history


def loss_decreased(history: list[dict[str, float]], key: str = "loss") -> bool:
    """Mean loss over the last 10% of epochs is below the mean over the first 10%."""
    if len(history) < 2:
        return False
    k = max(1, int(round(0.1 * len(history))))
    first = sum(h[key] for h in history[:k]) / k
    last = sum(h[key] for h in history[-k:]) / k
    return math.isfinite(last) and last < first


def freeze(module: torch.nn.Module) -> torch.nn.Module:
    module.eval()
    for p in module.parameters():
        p.requires_grad_(False)
    return module


def is_frozen(module: torch.nn.Module) -> bool:
    return not module.training and not any(p.requires_grad for p in module.parameters())
