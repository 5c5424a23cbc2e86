"""Gradient-weighted class activation heatmaps.

The heatmap for a target class is built from the classifier's last conv
feature maps A^k: channel weights are the spatial means of d(score)/dA^k,
the weighted sum is rectified, bilinearly upsampled to the input size and
min-max normalized into [0, 1]. An everywhere-zero rectified map stays
zero (no positive evidence).
"""

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..backbones import cam_target_layer
from ..datakit import LeafImage, unit_to_signed
from ..errors import UnsupportedBackboneError


def _to_input_tensor(img: LeafImage | np.ndarray) -> torch.Tensor:
    if isinstance(img, LeafImage):
        pixels = img.as_signed().pixels
    else:
        pixels = unit_to_signed(np.asarray(img, dtype=np.float32))
    return torch.from_numpy(pixels).permute(2, 0, 1).unsqueeze(0)


def normalize_heatmap(raw: np.ndarray) -> np.ndarray:
    """Min-max normalize a rectified map; all-zero stays all-zero and a
    constant positive map becomes all-ones (max is 1 whenever any
    activation is positive)."""
    lo = float(raw.min())
    hi = float(raw.max())
    if hi <= 0.0:
        return np.zeros_like(raw, dtype=np.float32)
    if hi == lo:
        return np.ones_like(raw, dtype=np.float32)
    return ((raw - lo) / (hi - lo)).astype(np.float32)


def gradcam(model: nn.Module, img: LeafImage | np.ndarray, target: int) -> np.ndarray:
    """Heatmap in [0, 1] for ``target`` over the image, at image resolution."""
    target_layer = cam_target_layer(model)
    model.eval()
    x = _to_input_tensor(img)

    captured: dict[str, torch.Tensor] = {}

    def _capture(module, inputs, output):
        captured["acts"] = output

    handle = target_layer.register_forward_hook(_capture)
    try:
        logits = model(x)
    finally:
        handle.remove()

    acts = captured.get("acts")
    if acts is None or acts.ndim != 4:
        raise UnsupportedBackboneError(
            "cam_target did not produce 4-D convolutional feature maps"
        )

    score = logits[0, int(target)]
    grads = torch.autograd.grad(score, acts, allow_unused=True)[0]
    if grads is None:
        grads = torch.zeros_like(acts)

    weights = grads.mean(dim=(2, 3), keepdim=True)           # alpha_k
    raw = F.relu((weights * acts).sum(dim=1, keepdim=True))  # rectified weighted sum
    h, w = x.shape[2], x.shape[3]
    up = F.interpolate(raw, size=(h, w), mode="bilinear", align_corners=False)
    return normalize_heatmap(up[0, 0].detach().numpy())
