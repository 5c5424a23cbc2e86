"""Dataset ingestion and the geometric recipes feeding the segmenter.

Covers: folder-backed domain datasets (trainA/trainB layout), the 3x3
overlapping-patch recipe that turns whole-leaf images into "partial leaf"
training samples, the six-fold rotation/flip augmentation, and assembly of
the three-class segmentation dataset with a seeded train/test split.
"""

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import ConfigError

log = logging.getLogger(__name__)

RANGE_UNIT = "unit"      # pixel values in [0, 1]
RANGE_SIGNED = "signed"  # pixel values in [-1, 1], GAN-internal
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

FULL_LEAF_DIR = "full_leaf"
PARTIAL_SOURCE_DIR = "partial_leaf_source"
NON_LEAF_DIR = "non_leaf"


@dataclass(frozen=True)
class LeafImage:
    """An H x W x 3 float raster with a declared value range."""

    pixels: np.ndarray
    value_range: str = RANGE_UNIT
    path: Path | None = None

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"expected H x W x 3 pixels, got shape {p.shape}")
        if p.shape[0] < 8 or p.shape[1] < 8:
            raise ValueError(f"image too small: {p.shape[0]}x{p.shape[1]} (minimum 8x8)")
        if self.value_range not in (RANGE_UNIT, RANGE_SIGNED):
            raise ValueError(f"unknown value range tag {self.value_range!r}")
        lo, hi = (0.0, 1.0) if self.value_range == RANGE_UNIT else (-1.0, 1.0)
        if not np.isfinite(p).all() or p.min() < lo - 1e-5 or p.max() > hi + 1e-5:
            raise ValueError(f"pixels outside declared {self.value_range} range")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def as_unit(self) -> "LeafImage":
        if self.value_range == RANGE_UNIT:
            return self
        unit = np.clip((self.pixels + 1.0) / 2.0, 0.0, 1.0).astype(np.float32)
        return LeafImage(unit, RANGE_UNIT, self.path)

    def as_signed(self) -> "LeafImage":
        if self.value_range == RANGE_SIGNED:
            return self
        signed = np.clip(self.pixels * 2.0 - 1.0, -1.0, 1.0).astype(np.float32)
        return LeafImage(signed, RANGE_SIGNED, self.path)


def unit_to_signed(pixels: np.ndarray) -> np.ndarray:
    return (pixels.astype(np.float32) * 2.0 - 1.0).clip(-1.0, 1.0)


def signed_to_unit(pixels: np.ndarray) -> np.ndarray:
    return ((pixels.astype(np.float32) + 1.0) / 2.0).clip(0.0, 1.0)


def center_square_resize(pixels: np.ndarray, side: int) -> np.ndarray:
    """Center-crop to square, then bilinearly resize to side x side.

    Single-leaf images are assumed roughly centered, so the center crop
    keeps the subject.
    """
    h, w = pixels.shape[:2]
    s = min(h, w)
    top = (h - s) // 2
    left = (w - s) // 2
    cropped = pixels[top:top + s, left:left + s]
    if s == side:
        return np.ascontiguousarray(cropped)
    im = PILImage.fromarray((np.clip(cropped, 0.0, 1.0) * 255.0).round().astype(np.uint8))
    im = im.resize((side, side), PILImage.BILINEAR)
    return np.asarray(im, dtype=np.float32) / 255.0


def load_image(path: Path | str, range_tag: str = RANGE_UNIT, side: int | None = None) -> LeafImage:
    """Decode an 8-bit RGB raster file into the declared value range."""
    path = Path(path)
    with PILImage.open(path) as im:
        rgb = im.convert("RGB")
        pixels = np.asarray(rgb, dtype=np.float32) / 255.0
    if side is not None:
        pixels = center_square_resize(pixels, side)
    img = LeafImage(pixels, RANGE_UNIT, path)
    return img.as_signed() if range_tag == RANGE_SIGNED else img


def save_image(img: LeafImage | np.ndarray, path: Path | str) -> Path:
    """Write a unit-range image (or array) as an 8-bit raster file."""
    path = Path(path)
    if isinstance(img, LeafImage):
        pixels = img.as_unit().pixels
    else:
        pixels = np.clip(img, 0.0, 1.0)
    data = (pixels * 255.0).round().astype(np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(data).save(path)
    return path


def list_image_files(directory: Path) -> list[Path]:
    """Image files in a directory, lexicographically ordered by name."""
    return sorted(
        (f for f in directory.iterdir() if f.is_file() and f.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda f: f.name,
    )


@dataclass
class DomainDataset:
    """All images of one translation domain, in deterministic order."""

    root_path: Path
    images: list[LeafImage]
    domain_tag: str = "source"

    def __len__(self) -> int:
        return len(self.images)

    def paths(self) -> list[Path]:
        return [img.path for img in self.images]


def load_domain_dataset(
    path: Path | str,
    range_tag: str = RANGE_UNIT,
    domain_tag: str = "source",
    side: int | None = None,
) -> DomainDataset:
    """Load every decodable image under ``path``, sorted by file name.

    Undecodable files are skipped with a warning; an empty or missing
    directory (or one where every file fails to decode) is a configuration
    error.
    """
    path = Path(path)
    if not path.is_dir():
        raise ConfigError(f"dataset directory does not exist: {path}")
    files = list_image_files(path)
    if not files:
        raise ConfigError(f"no image files in dataset directory: {path}")
    images = []
    for f in files:
        try:
            images.append(load_image(f, range_tag, side=side))
        except Exception as exc:  # undecodable or malformed raster
            warnings.warn(f"skipping undecodable image {f}: {exc}")
    if not images:
        raise ConfigError(f"all {len(files)} image files failed to decode under {path}")
    return DomainDataset(root_path=path, images=images, domain_tag=domain_tag)


@dataclass(frozen=True)
class PatchSpec:
    """Square sliding-window geometry: N -> nine N/2 windows at stride N/4."""

    side: int

    def __post_init__(self):
        if self.side % 4 != 0 or self.side <= 0:
            raise ValueError(f"patch side must be a positive multiple of 4, got {self.side}")

    @property
    def window(self) -> int:
        return self.side // 2

    @property
    def stride(self) -> int:
        return self.side // 4

    def offsets(self) -> list[tuple[int, int]]:
        steps = (0, self.stride, 2 * self.stride)
        return [(r, c) for r in steps for c in steps]


def extract_partial_patches(pixels: np.ndarray, spec: PatchSpec) -> list[np.ndarray]:
    """Crop the nine equally overlapping N/2 windows out of an N x N image.

    Offsets run over {0, N/4, N/2} in both directions, row-major, so the
    window footprints jointly cover every pixel. Works on H x W or
    H x W x C arrays; crops are verbatim copies.
    """
    h, w = pixels.shape[:2]
    if h != w:
        raise ValueError(f"patch extraction needs a square image, got {h}x{w}")
    if h != spec.side:
        raise ValueError(f"image side {h} does not match spec side {spec.side}")
    win = spec.window
    return [np.ascontiguousarray(pixels[r:r + win, c:c + win]) for r, c in spec.offsets()]


def augment_rot_flip(pixels: np.ndarray) -> list[np.ndarray]:
    """The six-fold geometric set: identity, three clockwise rotations,
    horizontal flip, vertical flip. Every output is a pixel permutation."""
    return [
        np.ascontiguousarray(pixels),
        np.ascontiguousarray(np.rot90(pixels, k=-1, axes=(0, 1))),
        np.ascontiguousarray(np.rot90(pixels, k=-2, axes=(0, 1))),
        np.ascontiguousarray(np.rot90(pixels, k=-3, axes=(0, 1))),
        np.ascontiguousarray(pixels[:, ::-1]),
        np.ascontiguousarray(pixels[::-1, :]),
    ]


@dataclass(frozen=True)
class LabeledSample:
    pixels: np.ndarray  # H x W x 3 float32, unit range
    label: int
    path: Path | None = None


@dataclass
class LabeledSplit:
    """A train/test split over a fixed class vocabulary."""

    class_names: list[str]
    train: list[LabeledSample] = field(default_factory=list)
    test: list[LabeledSample] = field(default_factory=list)

    def class_counts(self, which: str = "train") -> dict[str, int]:
        samples = self.train if which == "train" else self.test
        counts = {name: 0 for name in self.class_names}
        for s in samples:
            counts[self.class_names[s.label]] += 1
        return counts


LFLSEG_CLASSES = ["full_leaf", "partial_leaf", "non_leaf"]


def _split_class(samples: list[LabeledSample], split_ratio: float, rng: np.random.Generator):
    order = rng.permutation(len(samples))
    n_train = int(len(samples) * split_ratio)
    train = [samples[i] for i in order[:n_train]]
    test = [samples[i] for i in order[n_train:]]
    return train, test


def assemble_lflseg_dataset(
    full_dir: Path | str,
    partial_source_dir: Path | str,
    nonleaf_dir: Path | str,
    spec: PatchSpec,
    split_ratio: float = 0.7,
    seed: int = 0,
    input_side: int = 64,
) -> LabeledSplit:
    """Build the three-class segmentation-classifier dataset.

    Full-leaf images are augmented six-fold; each partial-leaf source image
    contributes its nine overlapping patches; non-leaf images pass through
    unchanged. Each class is split independently with a seeded shuffle,
    train taking floor(split_ratio * n) samples.
    """
    if not 0.0 < split_ratio < 1.0:
        raise ConfigError(f"split_ratio must be in (0, 1), got {split_ratio}")

    full_dir, partial_source_dir, nonleaf_dir = map(Path, (full_dir, partial_source_dir, nonleaf_dir))
    for name, d in (("full_leaf", full_dir), ("partial_leaf_source", partial_source_dir), ("non_leaf", nonleaf_dir)):
        if not d.is_dir() or not list_image_files(d):
            raise ConfigError(f"required class source {name} is empty or missing: {d}")

    per_class: list[list[LabeledSample]] = [[], [], []]

    for f in list_image_files(full_dir):
        img = load_image(f, RANGE_UNIT, side=input_side)
        for variant in augment_rot_flip(img.pixels):
            per_class[0].append(LabeledSample(variant.astype(np.float32), 0, f))

    for f in list_image_files(partial_source_dir):
        img = load_image(f, RANGE_UNIT, side=spec.side)
        for patch in extract_partial_patches(img.pixels, spec):
            if patch.shape[0] != input_side:
                patch = center_square_resize(patch, input_side)
            per_class[1].append(LabeledSample(patch.astype(np.float32), 1, f))

    for f in list_image_files(nonleaf_dir):
        img = load_image(f, RANGE_UNIT, side=input_side)
        per_class[2].append(LabeledSample(img.pixels, 2, f))

    counts = [len(c) for c in per_class]
    if min(counts) > 0 and max(counts) / min(counts) > 3:
        warnings.warn(
            "class imbalance above 3x: "
            + ", ".join(f"{n}={c}" for n, c in zip(LFLSEG_CLASSES, counts))
        )

    rng = np.random.default_rng(seed)
    split = LabeledSplit(class_names=list(LFLSEG_CLASSES))
    for samples in per_class:
        train, test = _split_class(samples, split_ratio, rng)
        split.train.extend(train)
        split.test.extend(test)
    log.info(
        "assembled lflseg dataset: train=%s test=%s",
        split.class_counts("train"),
        split.class_counts("test"),
    )
    return split


def load_labeled_folder(root: Path | str, input_side: int | None = None) -> LabeledSplit:
    """Load a one-folder-per-class tree into a (train-only) labeled set.

    Class vocabulary is the sorted list of subdirectory names.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConfigError(f"labeled dataset root does not exist: {root}")
    class_dirs = sorted((d for d in root.iterdir() if d.is_dir()), key=lambda d: d.name)
    if not class_dirs:
        raise ConfigError(f"no class subdirectories under {root}")
    split = LabeledSplit(class_names=[d.name for d in class_dirs])
    for label, d in enumerate(class_dirs):
        files = list_image_files(d)
        if not files:
            raise ConfigError(f"class directory is empty: {d}")
        for f in files:
            img = load_image(f, RANGE_UNIT, side=input_side)
            split.train.append(LabeledSample(img.pixels, label, f))
    return split


def write_labeled_split(split: LabeledSplit, out_root: Path | str) -> Path:
    """Materialize a split as train/<class>/ and test/<class>/ PNG trees."""
    out_root = Path(out_root)
    for which in ("train", "test"):
        samples = getattr(split, which)
        for i, s in enumerate(samples):
            cls = split.class_names[s.label]
            save_image(s.pixels, out_root / which / cls / f"{which}_{i:06d}.png")
    return out_root
