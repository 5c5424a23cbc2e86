"""Heatmap thresholding, the segmentation entry point, and the mask cache."""

import logging
import os
import tempfile
import warnings
from pathlib import Path

import numpy as np
import torch.nn as nn
from PIL import Image as PILImage

from ..datakit import LeafImage
from .classify import LeafClass, SegConfig
from .gradcam import gradcam

log = logging.getLogger(__name__)


def threshold_mask(heatmap: np.ndarray, delta: float) -> np.ndarray:
    """Binary mask: 1 wherever heatmap >= delta (ties included)."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    hm = np.asarray(heatmap)
    if hm.min() < 0.0 or hm.max() > 1.0:
        raise ValueError("heatmap values must lie in [0, 1]")
    return (hm >= delta).astype(np.uint8)


def segment(model: nn.Module, img: LeafImage | np.ndarray, cfg: SegConfig = SegConfig()) -> np.ndarray:
    """Attention mask for the full-leaf class.

    A mask with no positive pixels degrades the sample to unmasked
    behaviour: fall back to all-ones with a warning rather than handing
    the discriminator an empty image.
    """
    heatmap = gradcam(model, img, LeafClass.FULL_LEAF)
    mask = threshold_mask(heatmap, cfg.delta)
    if mask.sum() == 0:
        warnings.warn("segmentation produced an empty mask; falling back to all-ones")
        mask = np.ones_like(mask)
    return mask


def save_mask(mask: np.ndarray, path: Path | str) -> Path:
    """Write a {0,1} mask as 8-bit grayscale (0 background, 255 leaf).

    Write is atomic: temp file in the target directory, then rename.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = (np.asarray(mask, dtype=np.uint8) * 255).astype(np.uint8)
    fd, tmp_name = tempfile.mkstemp(suffix=".png", dir=path.parent)
    os.close(fd)
    try:
        PILImage.fromarray(data, mode="L").save(tmp_name, format="PNG")
        os.replace(tmp_name, path)
    except Exception:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def load_mask(path: Path | str) -> np.ndarray:
    """Read a cached grayscale mask back into {0,1}."""
    with PILImage.open(path) as im:
        data = np.asarray(im.convert("L"))
    return (data >= 128).astype(np.uint8)


def mask_cache_path(mask_root: Path | str, domain: str, image_path: Path | str) -> Path:
    """Cache layout: masks/<domain>/<image stem>.png"""
    return Path(mask_root) / domain / f"{Path(image_path).stem}.png"


def segment_to_cache(
    model: nn.Module,
    images: list[LeafImage],
    mask_root: Path | str,
    domain: str,
    cfg: SegConfig = SegConfig(),
    overwrite: bool = False,
) -> list[Path]:
    """Segment a batch of images into the mask cache; returns mask paths."""
    paths = []
    for img in images:
        if img.path is None:
            raise ValueError("mask caching requires images loaded from files")
        out = mask_cache_path(mask_root, domain, img.path)
        if overwrite or not out.exists():
            save_mask(segment(model, img, cfg), out)
        paths.append(out)
    log.info("mask cache for domain %s: %d masks under %s", domain, len(paths), mask_root)
    return paths
