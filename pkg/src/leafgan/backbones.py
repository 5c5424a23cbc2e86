"""Pluggable classifier backbones.

Any backbone used for CAM-based segmentation must expose ``cam_target``,
the module whose output is its last convolutional feature map stack.
The default is a small 4-block CNN sized for desk-scale experiments;
larger pretrained models can be registered under new names.
"""

import torch
import torch.nn as nn

from .errors import UnsupportedBackboneError


class SmallCNN(nn.Module):
    """4-block conv net: three downsampling blocks plus one full-resolution
    block whose ReLU output serves as the CAM target (side/8 feature maps)."""

    def __init__(self, num_classes: int, in_channels: int = 3, width: int = 16):
        super().__init__()
        w = width
        self.features = nn.Sequential(
            nn.Conv2d(in_channels, w, 3, padding=1),
            nn.BatchNorm2d(w),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(w, w * 2, 3, padding=1),
            nn.BatchNorm2d(w * 2),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(w * 2, w * 4, 3, padding=1),
            nn.BatchNorm2d(w * 4),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
        )
        self.top_block = nn.Sequential(
            nn.Conv2d(w * 4, w * 8, 3, padding=1),
            nn.BatchNorm2d(w * 8),
            nn.ReLU(inplace=True),
        )
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(w * 8, num_classes)

    @property
    def cam_target(self) -> nn.Module:
        return self.top_block

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.features(x)
        x = self.top_block(x)
        x = self.pool(x).flatten(1)
        return self.head(x)


class LinearProbe(nn.Module):
    """Flatten-and-classify probe; has no conv feature stage on purpose
    (exercises the unsupported-backbone path and toy separability tests)."""

    def __init__(self, num_classes: int, input_side: int = 64, in_channels: int = 3):
        super().__init__()
        self.head = nn.Linear(in_channels * input_side * input_side, num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(x.flatten(1))


_REGISTRY = {
    "small_cnn": lambda num_classes, input_side: SmallCNN(num_classes),
    "linear": lambda num_classes, input_side: LinearProbe(num_classes, input_side),
}


def register_backbone(name: str, factory) -> None:
    _REGISTRY[name] = factory


def build_backbone(name: str, num_classes: int, input_side: int) -> nn.Module:
    if name not in _REGISTRY:
        raise UnsupportedBackboneError(
            f"unknown backbone {name!r}; registered: {sorted(_REGISTRY)}"
        )
    return _REGISTRY[name](num_classes, input_side)


def cam_target_layer(model: nn.Module) -> nn.Module:
    """The module producing the model's last conv feature maps."""
    target = getattr(model, "cam_target", None)
    if not isinstance(target, nn.Module):
        raise UnsupportedBackboneError(
            f"{type(model).__name__} exposes no convolutional feature stage (cam_target)"
        )
    return target
