"""Masked unpaired translation GAN: two generators, two discriminators fed
mask-gated images, the four loss terms, the training loop and inference."""

from .losses import (
    LossWeights,
    adv_loss_F,
    adv_loss_G,
    apply_mask,
    bs_loss,
    cycle_loss,
    total_loss,
)
from .networks import PatchDiscriminator, ResnetGenerator, build_discriminator, build_generator
from .state import GanState, build_gan_state, load_checkpoint, save_checkpoint
from .trainer import GanTrainSettings, LossRecord, train, train_step
from .translate import translate

__all__ = [
    "LossWeights",
    "apply_mask",
    "adv_loss_G",
    "adv_loss_F",
    "cycle_loss",
    "bs_loss",
    "total_loss",
    "ResnetGenerator",
    "PatchDiscriminator",
    "build_generator",
    "build_discriminator",
    "GanState",
    "build_gan_state",
    "save_checkpoint",
    "load_checkpoint",
    "GanTrainSettings",
    "LossRecord",
    "train",
    "train_step",
    "translate",
]
