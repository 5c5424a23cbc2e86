"""Shared mini training loop for the classifiers in this pipeline.

Both the three-class leaf/patch/background model and the downstream
disease classifiers are trained with momentum SGD through this loop; the
only behavioural switch is the on-the-fly flip augmentation used by the
disease classifiers.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .backbones import build_backbone
from .datakit import LabeledSample, unit_to_signed
from .errors import NonFiniteLossError
from .seeding import seed_everything

log = logging.getLogger(__name__)


@dataclass
class ClassifierConfig:
    backbone: str = "small_cnn"
    input_side: int = 64
    epochs: int = 30
    batch_size: int = 128
    lr: float = 1e-3
    momentum: float = 0.9
    lr_step_epoch: int = 20
    lr_step_gamma: float = 0.1
    flip_augment: bool = False
    seed: int = 0


def samples_to_tensors(samples: list[LabeledSample]) -> tuple[torch.Tensor, torch.Tensor]:
    """Stack unit-range samples into a signed-range N x 3 x H x W batch."""
    pixels = np.stack([unit_to_signed(s.pixels) for s in samples])
    images = torch.from_numpy(pixels).permute(0, 3, 1, 2).contiguous()
    labels = torch.tensor([s.label for s in samples], dtype=torch.long)
    return images, labels


def _random_flips(pixels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if rng.random() < 0.5:
        pixels = pixels[:, ::-1]
    if rng.random() < 0.5:
        pixels = pixels[::-1, :]
    return np.ascontiguousarray(pixels)


def fit_classifier(
    samples: list[LabeledSample],
    num_classes: int,
    cfg: ClassifierConfig,
) -> tuple[nn.Module, list[float]]:
    """Train a softmax classifier; returns the model plus per-epoch mean loss.

    Deterministic given cfg.seed: weight init, shuffling and flip draws all
    derive from it. Raises NonFiniteLossError if the loss diverges.
    """
    seed_everything(cfg.seed)
    model = build_backbone(cfg.backbone, num_classes, cfg.input_side)
    optimizer = torch.optim.SGD(model.parameters(), lr=cfg.lr, momentum=cfg.momentum)
    scheduler = torch.optim.lr_scheduler.StepLR(
        optimizer, step_size=cfg.lr_step_epoch, gamma=cfg.lr_step_gamma
    )
    criterion = nn.CrossEntropyLoss()
    rng = np.random.default_rng(cfg.seed)

    n = len(samples)
    batches_per_epoch = max(1, math.ceil(n / cfg.batch_size))
    epoch_losses = []
    model.train()
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        running = 0.0
        for b in range(batches_per_epoch):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            if len(idx) == 0:
                continue
            batch = [samples[i] for i in idx]
            if cfg.flip_augment:
                batch = [LabeledSample(_random_flips(s.pixels, rng), s.label, s.path) for s in batch]
            images, labels = samples_to_tensors(batch)
            optimizer.zero_grad()
            loss = criterion(model(images), labels)
            if not torch.isfinite(loss):
                raise NonFiniteLossError(
                    f"classifier loss diverged at epoch {epoch} batch {b}: {loss.item()}"
                )
            loss.backward()
            optimizer.step()
            running += loss.item() * len(idx)
        scheduler.step()
        epoch_losses.append(running / n)
        log.debug("epoch %d/%d loss %.4f", epoch + 1, cfg.epochs, epoch_losses[-1])
    model.eval()
    return model, epoch_losses


@torch.no_grad()
def predict(model: nn.Module, samples: list[LabeledSample], batch_size: int = 128) -> np.ndarray:
    """Predicted class index per sample."""
    model.eval()
    out = []
    for b in range(0, len(samples), batch_size):
        images, _ = samples_to_tensors(samples[b:b + batch_size])
        out.append(model(images).argmax(dim=1).numpy())
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def accuracy(model: nn.Module, samples: list[LabeledSample], batch_size: int = 128) -> float:
    if not samples:
        return float("nan")
    preds = predict(model, samples, batch_size)
    labels = np.array([s.label for s in samples])
    return float((preds == labels).mean())
