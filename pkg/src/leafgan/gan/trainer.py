"""Training loop for the masked translation GAN.

Each step performs one generator update minimizing the full objective
(adversarial terms with generator-side targets plus weighted cycle and
background-similarity terms) and one update per discriminator on
mask-gated real/fake pairs, with fakes drawn from a history buffer.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image as PILImage

from ..datakit import DomainDataset, load_domain_dataset, RANGE_SIGNED
from ..errors import ConfigError, NonFiniteLossError
from ..lflseg.classify import SegConfig, load_classifier
from ..lflseg.segment import load_mask, mask_cache_path, save_mask, segment
from ..seeding import stage_seed
from .losses import (
    LossWeights,
    apply_mask,
    discriminator_loss,
    generator_adv_loss,
    total_loss,
)
from .state import GanArch, GanState, build_gan_state, save_checkpoint

log = logging.getLogger(__name__)

LOSS_CSV_COLUMNS = ("iter", "adv_G", "adv_F", "cyc", "bs", "total")


@dataclass
class MaskedBatch:
    """A paired sampling of both domains with precomputed leaf masks."""

    real_x: torch.Tensor  # B x 3 x H x W, signed range
    real_y: torch.Tensor
    mask_x: torch.Tensor  # B x 1 x H x W, {0, 1}
    mask_y: torch.Tensor

    def __post_init__(self):
        if self.real_x.shape != self.real_y.shape:
            raise ValueError("domain batches must share a shape")
        for name, m in (("mask_x", self.mask_x), ("mask_y", self.mask_y)):
            if m.shape[-2:] != self.real_x.shape[-2:] or m.shape[0] != self.real_x.shape[0]:
                raise ValueError(f"{name} misaligned with images: {tuple(m.shape)}")
            uniq = torch.unique(m)
            if not bool(((uniq == 0) | (uniq == 1)).all()):
                raise ValueError(f"{name} must be binary")


@dataclass
class LossRecord:
    iteration: int
    adv_g: float
    adv_f: float
    cyc: float
    bs: float
    total: float

    def as_row(self) -> list:
        return [self.iteration, self.adv_g, self.adv_f, self.cyc, self.bs, self.total]


@dataclass
class GanTrainSettings:
    data_root: Path | str
    out_dir: Path | str
    mask_root: Path | str | None = None
    lflseg_checkpoint: Path | str | None = None
    epochs: int = 200
    batch_size: int = 1
    lr: float = 2e-4
    lam: float = 10.0
    image_side: int = 64
    ngf: int = 64
    ndf: int = 64
    n_blocks: int | None = None
    buffer_size: int = 50
    checkpoint_every: int = 5
    identity_loss: bool = False
    delta: float = 0.35
    seed: int = 0
    config_hash: str = ""
    all_ones_masks: bool = False  # vanilla ablation: disables mask gating
    loss_records: list = field(default_factory=list)


def train_step(state: GanState, batch: MaskedBatch, weights: LossWeights,
               identity_loss: bool = False) -> LossRecord:
    """One generator update followed by one update per discriminator."""
    state.generators_train()
    x, y = batch.real_x, batch.real_y
    s_x, s_y = batch.mask_x, batch.mask_y

    fake_y = state.G(x)
    rec_x = state.F(fake_y)
    fake_x = state.F(y)
    rec_y = state.G(fake_x)

    x_s = apply_mask(x, s_x)
    y_s = apply_mask(y, s_y)
    fake_y_s = apply_mask(fake_y, s_x)  # generated leaf stays where the source leaf was
    fake_x_s = apply_mask(fake_x, s_y)

    # generator update (discriminators frozen)
    state.set_discriminators_trainable(False)
    adv_g = generator_adv_loss(state.D_Y, fake_y_s)
    adv_f = generator_adv_loss(state.D_X, fake_x_s)
    cyc = (rec_x - x).abs().mean() + (rec_y - y).abs().mean()
    bs = apply_mask(fake_y - x, 1.0 - s_x).abs().mean() + apply_mask(fake_x - y, 1.0 - s_y).abs().mean()
    loss_g = total_loss(adv_g, adv_f, cyc, bs, weights)
    if identity_loss:
        idt = (state.G(y) - y).abs().mean() + (state.F(x) - x).abs().mean()
        loss_g = loss_g + 0.5 * weights.lam * idt
    state.opt_G.zero_grad()
    loss_g.backward()
    state.opt_G.step()

    # discriminator updates on history-buffer fakes
    state.set_discriminators_trainable(True)
    fake_y_hist = state.pool_Y.query(fake_y_s.detach())
    fake_x_hist = state.pool_X.query(fake_x_s.detach())
    d_y_loss = discriminator_loss(state.D_Y, y_s, fake_y_hist)
    d_x_loss = discriminator_loss(state.D_X, x_s, fake_x_hist)
    state.opt_D.zero_grad()
    (d_y_loss + d_x_loss).backward()
    state.opt_D.step()

    state.iteration += 1
    return LossRecord(
        iteration=state.iteration,
        adv_g=adv_g.item(),
        adv_f=adv_f.item(),
        cyc=cyc.item(),
        bs=bs.item(),
        total=loss_g.item(),
    )


def _dataset_to_tensor(dataset: DomainDataset) -> torch.Tensor:
    stack = np.stack([img.pixels for img in dataset.images])
    return torch.from_numpy(stack).permute(0, 3, 1, 2).contiguous()


def _resize_mask(mask: np.ndarray, side: int) -> np.ndarray:
    if mask.shape == (side, side):
        return mask
    im = PILImage.fromarray((mask * 255).astype(np.uint8), mode="L")
    return (np.asarray(im.resize((side, side), PILImage.NEAREST)) >= 128).astype(np.uint8)


def _load_masks(settings: GanTrainSettings, dataset: DomainDataset, domain: str) -> torch.Tensor:
    """One {0,1} mask per image, from the cache or freshly segmented."""
    side = settings.image_side
    if settings.all_ones_masks:
        n = len(dataset)
        return torch.ones((n, 1, side, side), dtype=torch.float32)

    classifier = None
    masks = []
    for img in dataset.images:
        cached = None
        if settings.mask_root is not None:
            path = mask_cache_path(settings.mask_root, domain, img.path)
            if path.is_file():
                cached = load_mask(path)
        if cached is None:
            if settings.lflseg_checkpoint is None:
                raise ConfigError(
                    f"no cached mask for {img.path} and no segmentation checkpoint configured"
                )
            if classifier is None:
                classifier, payload = load_classifier(settings.lflseg_checkpoint)
            cached = segment(
                classifier, img.as_unit(),
                SegConfig(delta=settings.delta, input_side=side),
            )
            if settings.mask_root is not None:
                save_mask(cached, mask_cache_path(settings.mask_root, domain, img.path))
        masks.append(_resize_mask(cached, side))
    stack = np.stack(masks).astype(np.float32)
    return torch.from_numpy(stack).unsqueeze(1)


class LossCsvWriter:
    """Append-only loss curve log."""

    def __init__(self, path: Path):
        self.path = path
        path.parent.mkdir(parents=True, exist_ok=True)
        if not path.exists():
            with open(path, "w", newline="") as fh:
                csv.writer(fh).writerow(LOSS_CSV_COLUMNS)

    def append(self, record: LossRecord) -> None:
        with open(self.path, "a", newline="") as fh:
            csv.writer(fh).writerow(
                [record.iteration] + [f"{v:.8f}" for v in record.as_row()[1:]]
            )


def train(settings: GanTrainSettings) -> tuple[GanState, list[LossRecord]]:
    """Run the full training schedule over shuffled unpaired batches.

    Each epoch covers ceil(max(|A|, |B|) / batch) steps, cycling the
    smaller domain. Checkpoints are written every ``checkpoint_every``
    epochs and always at the end; on divergence the last good state is
    persisted before the error propagates.
    """
    data_root = Path(settings.data_root)
    out_dir = Path(settings.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    domain_a = load_domain_dataset(data_root / "trainA", RANGE_SIGNED, "source", settings.image_side)
    domain_b = load_domain_dataset(data_root / "trainB", RANGE_SIGNED, "target", settings.image_side)
    images_a = _dataset_to_tensor(domain_a)
    images_b = _dataset_to_tensor(domain_b)
    masks_a = _load_masks(settings, domain_a, "trainA")
    masks_b = _load_masks(settings, domain_b, "trainB")

    arch = GanArch(settings.image_side, settings.ngf, settings.ndf, settings.n_blocks)
    state = build_gan_state(
        arch, settings.epochs, lr=settings.lr,
        buffer_size=settings.buffer_size, seed=settings.seed,
    )
    weights = LossWeights(settings.lam)
    shuffle_rng = np.random.default_rng(stage_seed(settings.seed, "gan") + 2)
    writer = LossCsvWriter(out_dir / "loss_curves.csv")
    ckpt_root = out_dir / "checkpoints"

    n_a, n_b = len(domain_a), len(domain_b)
    steps_per_epoch = math.ceil(max(n_a, n_b) / settings.batch_size)
    records: list[LossRecord] = []

    def _persist():
        return save_checkpoint(
            state, ckpt_root, settings.seed, settings.config_hash,
            settings.epochs, settings.lr, settings.buffer_size,
        )

    log.info("gan training: %d epochs x %d steps, domains %d/%d", settings.epochs, steps_per_epoch, n_a, n_b)
    for epoch in range(settings.epochs):
        idx_a = _epoch_indices(n_a, steps_per_epoch * settings.batch_size, shuffle_rng)
        idx_b = _epoch_indices(n_b, steps_per_epoch * settings.batch_size, shuffle_rng)
        for step in range(steps_per_epoch):
            sel_a = idx_a[step * settings.batch_size:(step + 1) * settings.batch_size]
            sel_b = idx_b[step * settings.batch_size:(step + 1) * settings.batch_size]
            batch = MaskedBatch(
                real_x=images_a[sel_a],
                real_y=images_b[sel_b],
                mask_x=masks_a[sel_a],
                mask_y=masks_b[sel_b],
            )
            try:
                record = train_step(state, batch, weights, settings.identity_loss)
            except NonFiniteLossError:
                log.error("divergence at iteration %d; persisting last good state", state.iteration)
                _persist()
                raise
            records.append(record)
            writer.append(record)
        state.sched_G.step()
        state.sched_D.step()
        state.epoch = epoch + 1
        if (epoch + 1) % settings.checkpoint_every == 0 or epoch + 1 == settings.epochs:
            _persist()
    settings.loss_records = records
    return state, records


def _epoch_indices(n: int, needed: int, rng: np.random.Generator) -> np.ndarray:
    """A shuffled index stream of exactly ``needed`` entries, reshuffling
    every pass so the smaller domain cycles through fresh permutations."""
    reps = []
    total = 0
    while total < needed:
        reps.append(rng.permutation(n))
        total += n
    return np.concatenate(reps)[:needed]
