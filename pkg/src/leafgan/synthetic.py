"""Synthetic desk-scale benchmark corpora.

Real leaf datasets are large and proprietary, so validation runs on
generated toys that keep the structure the pipeline cares about:
textured ellipses on varied backgrounds stand in for single-leaf photos
(with exact ground-truth masks), and plain-vs-spotted disks form a pair
of translation domains where the "disease" is a purely local texture
edit.
"""

import numpy as np
from pathlib import Path
from PIL import Image as PILImage

from .datakit import save_image
from .lflseg.segment import save_mask

BACKGROUND_PALETTE = np.array(
    [
        [0.45, 0.33, 0.22],  # soil
        [0.55, 0.65, 0.80],  # sky
        [0.55, 0.55, 0.55],  # concrete
        [0.70, 0.62, 0.35],  # straw
        [0.30, 0.25, 0.20],  # mulch
        [0.25, 0.48, 0.20],  # grass: green but smooth, so color alone
        [0.33, 0.55, 0.28],  # cannot separate leaf from background
    ],
    dtype=np.float32,
)


def smooth_field(side: int, rng: np.random.Generator, cells: int = 6) -> np.ndarray:
    """Low-frequency random field in [0, 1]."""
    coarse = (rng.random((cells, cells)) * 255).astype(np.uint8)
    im = PILImage.fromarray(coarse, mode="L").resize((side, side), PILImage.BILINEAR)
    return np.asarray(im, dtype=np.float32) / 255.0


def texture_background(side: int, rng: np.random.Generator) -> np.ndarray:
    base = BACKGROUND_PALETTE[rng.integers(len(BACKGROUND_PALETTE))]
    base = np.clip(base + rng.normal(0.0, 0.05, 3), 0.05, 0.95).astype(np.float32)
    img = np.empty((side, side, 3), dtype=np.float32)
    for c in range(3):
        img[:, :, c] = base[c] * (0.65 + 0.55 * smooth_field(side, rng))
    img += rng.normal(0.0, 0.02, img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def leaf_texture(side: int, rng: np.random.Generator) -> np.ndarray:
    """Green fill with a faint vein pattern; the veins, not the color, are
    what distinguishes leaf matter from the grass-like backgrounds."""
    base = np.array([0.22, 0.48, 0.18], dtype=np.float32)
    base = np.clip(base + rng.normal(0.0, 0.04, 3), 0.05, 0.9).astype(np.float32)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float32)
    theta = rng.uniform(0, np.pi)
    freq = rng.uniform(0.35, 0.7)
    stripes = np.sin(freq * (np.cos(theta) * xx + np.sin(theta) * yy) + rng.uniform(0, 6.28))
    veins = -0.07 * np.clip(np.abs(stripes) < 0.12, 0, 1)  # thin dark lines
    shade = 0.12 * (smooth_field(side, rng) - 0.5)
    img = np.empty((side, side, 3), dtype=np.float32)
    for c in range(3):
        img[:, :, c] = base[c] + veins + shade
    img += rng.normal(0.0, 0.02, img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def ellipse_mask(
    side: int,
    rng: np.random.Generator,
    radius_range: tuple[float, float] = (0.28, 0.42),
) -> tuple[np.ndarray, tuple]:
    cx = side / 2 + rng.uniform(-0.06, 0.06) * side
    cy = side / 2 + rng.uniform(-0.06, 0.06) * side
    a = rng.uniform(*radius_range) * side
    b = rng.uniform(*radius_range) * side
    theta = rng.uniform(0, np.pi)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float32)
    dx, dy = xx - cx, yy - cy
    u = np.cos(theta) * dx + np.sin(theta) * dy
    v = -np.sin(theta) * dx + np.cos(theta) * dy
    radial = (u / a) ** 2 + (v / b) ** 2
    return (radial <= 1.0).astype(np.uint8), (cx, cy, a, b, theta, radial)


def _stem_marker(img: np.ndarray, params: tuple, rng: np.random.Generator) -> None:
    """Stamp one compact high-contrast stem scar inside the ellipse.

    Leaves carry exactly one; fragments inherit it wherever the window
    lands, so its mere presence separates leaf matter from background but
    not full leaves from fragments.
    """
    side = img.shape[0]
    cx, cy, a, b, theta, _ = params
    ang = rng.uniform(0, 2 * np.pi)
    rad = rng.uniform(0.1, 0.55)
    mx = cx + rad * a * np.cos(theta) * np.cos(ang) - rad * b * np.sin(theta) * np.sin(ang)
    my = cy + rad * a * np.sin(theta) * np.cos(ang) + rad * b * np.cos(theta) * np.sin(ang)
    mr = rng.uniform(0.05, 0.08) * side
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float32)
    spot = ((xx - mx) ** 2 + (yy - my) ** 2) <= mr * mr
    img[spot] = img[spot] * 0.15 + np.array([0.7, 0.12, 0.08], dtype=np.float32) * 0.85


def full_leaf_image(
    side: int,
    rng: np.random.Generator,
    radius_range: tuple[float, float] = (0.23, 0.35),
    n_markers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """A single centered leaf on a varied background, plus its exact mask.

    The leaf edge carries a dark rim so the closed outline stays visible
    even against the green backgrounds; fragments then show rim arcs that
    exit the frame, which is the shape cue separating them from whole
    leaves.
    """
    bg = texture_background(side, rng)
    leaf = leaf_texture(side, rng)
    mask, params = ellipse_mask(side, rng, radius_range)
    radial = params[5]
    img = np.where(mask[:, :, None].astype(bool), leaf, bg).astype(np.float32)
    rim = (radial >= 0.78) & (radial <= 1.0)
    img[rim] *= 0.4
    for _ in range(n_markers):
        _stem_marker(img, params, rng)
    return np.clip(img, 0.0, 1.0).astype(np.float32), mask


def _distractor_arcs(img: np.ndarray, rng: np.random.Generator) -> None:
    """Dark curved strokes (twigs, shadows) so edge fragments alone do not
    mark an image as leaf matter."""
    side = img.shape[0]
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float32)
    for _ in range(int(rng.integers(1, 4))):
        cx, cy = rng.uniform(0, side, 2)
        r = rng.uniform(0.3, 0.9) * side
        band = np.abs(np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2) - r) < rng.uniform(1.0, 2.5)
        img[band] *= rng.uniform(0.35, 0.55)


def _distractor_patch(img: np.ndarray, rng: np.random.Generator) -> None:
    """A feathered striped-green region: leaf-colored and coarsely striped
    but with neither a crisp dark rim nor a closed outline."""
    side = img.shape[0]
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float32)
    cx, cy = rng.uniform(0.2, 0.8, 2) * side
    rx, ry = rng.uniform(0.2, 0.45, 2) * side
    falloff = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2
    alpha = np.clip(1.6 - falloff, 0.0, 1.0)[:, :, None]  # soft shoulder, no edge
    base = np.array([0.3, 0.52, 0.16], dtype=np.float32) + rng.normal(0, 0.03, 3).astype(np.float32)
    theta = rng.uniform(0, np.pi)
    # stripe scale matches the leaf veins so texture alone says nothing
    stripes = np.sin(rng.uniform(0.35, 0.7) * (np.cos(theta) * xx + np.sin(theta) * yy))
    tex = np.clip(base[None, None, :] - 0.07 * (np.abs(stripes) < 0.12)[:, :, None], 0, 1)
    img[:] = (1 - alpha) * img + alpha * tex


def non_leaf_image(side: int, rng: np.random.Generator) -> np.ndarray:
    """Backgrounds plus leaf-part distractors; everything a leaf shows
    except the closed outline and the stem scar."""
    img = texture_background(side, rng)
    kind = rng.random()
    if kind > 0.65:
        _distractor_patch(img, rng)
    if kind > 0.3:
        _distractor_arcs(img, rng)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def _disk_mask(side: int, rng: np.random.Generator) -> tuple[np.ndarray, tuple[float, float, float]]:
    cx = side / 2 + rng.uniform(-0.05, 0.05) * side
    cy = side / 2 + rng.uniform(-0.05, 0.05) * side
    r = rng.uniform(0.26, 0.38) * side
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float32)
    return (((xx - cx) ** 2 + (yy - cy) ** 2) <= r * r).astype(np.uint8), (cx, cy, r)


def disk_image(side: int, rng: np.random.Generator, spotted: bool) -> tuple[np.ndarray, np.ndarray]:
    """Plain or spotted disk over a varied background; the spots are the
    only systematic difference between the two domains."""
    bg = texture_background(side, rng)
    mask, (cx, cy, r) = _disk_mask(side, rng)
    disk = leaf_texture(side, rng)
    img = np.where(mask[:, :, None].astype(bool), disk, bg)
    if spotted:
        yy, xx = np.mgrid[0:side, 0:side].astype(np.float32)
        for _ in range(int(rng.integers(5, 9))):
            ang = rng.uniform(0, 2 * np.pi)
            rad = rng.uniform(0, 0.6) * r
            sx, sy = cx + rad * np.cos(ang), cy + rad * np.sin(ang)
            sr = rng.uniform(0.06, 0.12) * side
            spot = (((xx - sx) ** 2 + (yy - sy) ** 2) <= sr * sr) & mask.astype(bool)
            img[spot] = img[spot] * 0.25 + np.array([0.22, 0.12, 0.06], dtype=np.float32) * 0.75
    return np.clip(img, 0.0, 1.0).astype(np.float32), mask


def write_lflseg_corpus(
    root: Path | str,
    n_full: int = 50,
    n_partial_sources: int = 34,
    n_nonleaf: int = 300,
    n_eval: int = 60,
    side: int = 64,
    seed: int = 0,
) -> dict[str, Path]:
    """Materialize the three class-source folders plus a held-out
    full-leaf evaluation set with ground-truth masks.

    Full-leaf counts are pre-augmentation (x6 in assembly) and partial
    sources are rendered at 2x side so the nine-patch recipe emits
    side-sized fragments.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    dirs = {
        "full": root / "full_leaf",
        "partial_source": root / "partial_leaf_source",
        "nonleaf": root / "non_leaf",
        "eval_full": root / "eval_full",
        "eval_masks": root / "eval_masks",
    }
    for i in range(n_full):
        img, _ = full_leaf_image(side, rng)
        save_image(img, dirs["full"] / f"full_{i:05d}.png")
    for i in range(n_partial_sources):
        # patch sources render large leaves at 2x scale, so every window
        # carries substantial leaf and fragments show 2x-coarse rims and
        # scars; extra stem scars keep marker-free fragments rare
        img, _ = full_leaf_image(side * 2, rng, radius_range=(0.34, 0.45), n_markers=3)
        save_image(img, dirs["partial_source"] / f"src_{i:05d}.png")
    for i in range(n_nonleaf):
        save_image(non_leaf_image(side, rng), dirs["nonleaf"] / f"bg_{i:05d}.png")
    for i in range(n_eval):
        img, mask = full_leaf_image(side, rng)
        save_image(img, dirs["eval_full"] / f"eval_{i:05d}.png")
        save_mask(mask, dirs["eval_masks"] / f"eval_{i:05d}.png")
    return dirs


def write_gan_corpus(
    root: Path | str,
    n_train: int = 20,
    n_test: int = 6,
    side: int = 64,
    seed: int = 0,
) -> dict[str, Path]:
    """Two-domain folder tree (trainA/trainB/testA/testB) of plain and
    spotted disks, with exact disk masks cached in the standard layout."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    out = {"root": root, "masks": root / "masks"}
    for sub, n, spotted in (
        ("trainA", n_train, False),
        ("trainB", n_train, True),
        ("testA", n_test, False),
        ("testB", n_test, True),
    ):
        for i in range(n):
            img, mask = disk_image(side, rng, spotted)
            stem = f"{sub}_{i:05d}"
            save_image(img, root / sub / f"{stem}.png")
            save_mask(mask, root / "masks" / sub / f"{stem}.png")
        out[sub] = root / sub
    return out
