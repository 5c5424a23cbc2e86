"""Training and persistence of the three-class leaf classifier."""

import logging
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import torch
import torch.nn as nn

from ..backbones import build_backbone
from ..datakit import LabeledSplit
from ..errors import ConfigError
from ..training import ClassifierConfig, accuracy, fit_classifier

log = logging.getLogger(__name__)


class LeafClass(IntEnum):
    """The three training labels; FULL_LEAF is the CAM target class."""

    FULL_LEAF = 0
    PARTIAL_LEAF = 1
    NON_LEAF = 2


@dataclass(frozen=True)
class SegConfig:
    """Segmentation settings: CAM threshold, backbone id, input side."""

    delta: float = 0.35
    backbone: str = "small_cnn"
    input_side: int = 64

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta must be in (0, 1), got {self.delta}")


def train_lflseg(
    dataset: LabeledSplit,
    epochs: int = 30,
    batch_size: int = 128,
    lr: float = 1e-3,
    momentum: float = 0.9,
    backbone: str = "small_cnn",
    input_side: int = 64,
    seed: int = 0,
) -> tuple[nn.Module, float]:
    """Train the classifier and report final test accuracy.

    Every class must appear in the train split (the CAM for the full-leaf
    class is meaningless otherwise).
    """
    num_classes = len(dataset.class_names)
    train_counts = dataset.class_counts("train")
    missing = [name for name, c in train_counts.items() if c == 0]
    if missing:
        raise ConfigError(f"train split is missing classes: {missing}")

    cfg = ClassifierConfig(
        backbone=backbone,
        input_side=input_side,
        epochs=epochs,
        batch_size=batch_size,
        lr=lr,
        momentum=momentum,
        flip_augment=False,
        seed=seed,
    )
    model, losses = fit_classifier(dataset.train, num_classes, cfg)
    test_acc = accuracy(model, dataset.test) if dataset.test else float("nan")
    log.info("leaf classifier trained: final loss %.4f, test accuracy %.4f",
             losses[-1] if losses else float("nan"), test_acc)
    return model, test_acc


def save_classifier(
    model: nn.Module,
    directory: Path | str,
    backbone: str,
    num_classes: int,
    input_side: int,
    stem: str = "lflseg",
) -> Path:
    """Persist a checkpoint under a versioned file name (atomic write)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    version = 1
    while (directory / f"{stem}_v{version:03d}.pt").exists():
        version += 1
    path = directory / f"{stem}_v{version:03d}.pt"
    payload = {
        "backbone": backbone,
        "num_classes": num_classes,
        "input_side": input_side,
        "state_dict": model.state_dict(),
    }
    tmp = path.with_suffix(".pt.tmp")
    torch.save(payload, tmp)
    tmp.replace(path)
    return path


def load_classifier(path: Path | str) -> tuple[nn.Module, dict]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"classifier checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = build_backbone(payload["backbone"], payload["num_classes"], payload["input_side"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload
