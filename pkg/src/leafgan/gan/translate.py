"""Inference-time translation, raw or background-compositing."""

import logging
import warnings
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from ..datakit import (
    LeafImage,
    RANGE_SIGNED,
    center_square_resize,
    list_image_files,
    load_image,
    save_image,
)
from ..errors import ConfigError
from ..lflseg.classify import SegConfig, load_classifier
from ..lflseg.segment import load_mask, mask_cache_path, segment
from .state import GanState, load_generator

log = logging.getLogger(__name__)

DIRECTIONS = ("a2b", "b2a")


def _pick_generator(model, direction: str) -> nn.Module:
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if isinstance(model, GanState):
        return model.G if direction == "a2b" else model.F
    return model


@torch.no_grad()
def translate(
    model,
    img: LeafImage,
    direction: str = "a2b",
    composite: bool = False,
    mask: np.ndarray | None = None,
    expected_side: int | None = None,
) -> LeafImage:
    """Map one image through the trained generator for ``direction``.

    With ``composite`` set, background pixels (mask 0) are copied verbatim
    from the input: S * gen + (1 - S) * input implemented as a select so
    the copy is bit-exact.
    """
    generator = _pick_generator(model, direction)
    generator.eval()
    signed = img.as_signed()
    pixels = signed.pixels
    if expected_side is not None and pixels.shape[:2] != (expected_side, expected_side):
        warnings.warn(
            f"input is {pixels.shape[0]}x{pixels.shape[1]}, resizing to training side {expected_side}"
        )
        pixels = (center_square_resize(signed.as_unit().pixels, expected_side) * 2.0 - 1.0).astype(np.float32)
        if mask is not None and mask.shape != (expected_side, expected_side):
            raise ValueError("composite mask must match the resized image")

    x = torch.from_numpy(pixels).permute(2, 0, 1).unsqueeze(0)
    out = generator(x)

    if composite:
        if mask is None:
            raise ValueError("composite translation requires a leaf mask")
        if mask.shape != pixels.shape[:2]:
            raise ValueError(f"mask shape {mask.shape} misaligned with image {pixels.shape[:2]}")
        keep = torch.from_numpy(mask.astype(bool)).unsqueeze(0).unsqueeze(0)
        out = torch.where(keep, out, x)

    result = out[0].permute(1, 2, 0).clamp(-1.0, 1.0).numpy().astype(np.float32)
    return LeafImage(result, RANGE_SIGNED, img.path)


def _mask_for(img: LeafImage, side: int, mask_root, domain: str, classifier, delta: float) -> np.ndarray:
    if mask_root is not None:
        path = mask_cache_path(mask_root, domain, img.path)
        if path.is_file():
            m = load_mask(path)
            if m.shape == (side, side):
                return m
    if classifier is None:
        raise ConfigError(
            f"composite mode needs a cached mask or a segmentation checkpoint for {img.path}"
        )
    return segment(classifier, img.as_unit(), SegConfig(delta=delta, input_side=side))


def generate_folder(
    checkpoint_root: Path | str,
    in_dir: Path | str,
    out_dir: Path | str,
    direction: str = "a2b",
    composite: bool = False,
    mask_root: Path | str | None = None,
    lflseg_checkpoint: Path | str | None = None,
    delta: float = 0.35,
) -> list[Path]:
    """Translate every image in a folder; returns the written paths.

    Outputs are named <stem>_fake_<domain>.png (plus _comp in composite
    mode), never overwriting inputs.
    """
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    if in_dir.resolve() == out_dir.resolve():
        raise ConfigError("output directory must differ from the input directory")
    generator, manifest = load_generator(checkpoint_root, direction)
    side = manifest["arch"]["image_side"]
    target_tag = "B" if direction == "a2b" else "A"
    mask_domain = "trainA" if direction == "a2b" else "trainB"

    classifier = None
    if composite and lflseg_checkpoint is not None:
        classifier, _ = load_classifier(lflseg_checkpoint)

    files = list_image_files(in_dir)
    if not files:
        raise ConfigError(f"no input images under {in_dir}")
    written = []
    for f in files:
        img = load_image(f, RANGE_SIGNED, side=side)
        mask = None
        if composite:
            mask = _mask_for(img, side, mask_root, mask_domain, classifier, delta)
        out = translate(generator, img, direction, composite=composite, mask=mask, expected_side=side)
        suffix = "_comp" if composite else ""
        out_path = out_dir / f"{f.stem}_fake_{target_tag}{suffix}.png"
        save_image(out.as_unit(), out_path)
        written.append(out_path)
    log.info("translated %d images from %s into %s", len(written), in_dir, out_dir)
    return written
