"""GAN training state and checkpoint persistence.

A checkpoint is one directory per epoch holding one blob per network plus
a training-state blob (optimizers, schedulers, RNG streams, history
buffers, iteration counter). A JSON manifest at the checkpoint root
records epoch, seed and config hash for every saved version.
"""

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from itertools import chain
from pathlib import Path

import numpy as np
import torch

from ..errors import ConfigError
from ..seeding import seed_everything, stage_seed
from .networks import build_discriminator, build_generator, default_n_blocks
from .pool import ImagePool

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class GanArch:
    image_side: int = 64
    ngf: int = 64
    ndf: int = 64
    n_blocks: int | None = None

    def resolved_blocks(self) -> int:
        return self.n_blocks if self.n_blocks is not None else default_n_blocks(self.image_side)


@dataclass
class GanState:
    G: torch.nn.Module
    F: torch.nn.Module
    D_X: torch.nn.Module
    D_Y: torch.nn.Module
    opt_G: torch.optim.Optimizer
    opt_D: torch.optim.Optimizer
    sched_G: torch.optim.lr_scheduler.LambdaLR
    sched_D: torch.optim.lr_scheduler.LambdaLR
    pool_X: ImagePool
    pool_Y: ImagePool
    arch: GanArch
    iteration: int = 0
    epoch: int = 0
    extras: dict = field(default_factory=dict)

    def generators_train(self):
        self.G.train()
        self.F.train()

    def set_discriminators_trainable(self, flag: bool):
        for p in chain(self.D_X.parameters(), self.D_Y.parameters()):
            p.requires_grad_(flag)


def _decay_factor(epoch: int, total_epochs: int) -> float:
    """Constant LR for the first half, then linear decay toward zero."""
    half = total_epochs // 2
    if epoch < half:
        return 1.0
    return max(0.0, float(total_epochs - epoch) / float(max(1, total_epochs - half)))


def build_gan_state(
    arch: GanArch,
    total_epochs: int,
    lr: float = 2e-4,
    buffer_size: int = 50,
    seed: int = 0,
) -> GanState:
    """Fresh state: identical-architecture generator pair and
    discriminator pair, shared-optimizer setup, seeded history buffers."""
    seed_everything(stage_seed(seed, "gan"))
    blocks = arch.resolved_blocks()
    G = build_generator(arch.image_side, arch.ngf, blocks)
    F = build_generator(arch.image_side, arch.ngf, blocks)
    D_X = build_discriminator(arch.ndf)
    D_Y = build_discriminator(arch.ndf)
    opt_G = torch.optim.Adam(chain(G.parameters(), F.parameters()), lr=lr, betas=(0.5, 0.999))
    opt_D = torch.optim.Adam(chain(D_X.parameters(), D_Y.parameters()), lr=lr, betas=(0.5, 0.999))
    lam = lambda e: _decay_factor(e, total_epochs)
    sched_G = torch.optim.lr_scheduler.LambdaLR(opt_G, lam)
    sched_D = torch.optim.lr_scheduler.LambdaLR(opt_D, lam)
    pool_rng = np.random.default_rng(stage_seed(seed, "gan") + 1)
    return GanState(
        G=G, F=F, D_X=D_X, D_Y=D_Y,
        opt_G=opt_G, opt_D=opt_D,
        sched_G=sched_G, sched_D=sched_D,
        pool_X=ImagePool(buffer_size, pool_rng),
        pool_Y=ImagePool(buffer_size, pool_rng),
        arch=arch,
    )


def _atomic_torch_save(payload, path: Path) -> None:
    fd, tmp = tempfile.mkstemp(suffix=".pt", dir=path.parent)
    os.close(fd)
    try:
        torch.save(payload, tmp)
        os.replace(tmp, path)
    except Exception:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(root: Path, manifest: dict) -> None:
    fd, tmp = tempfile.mkstemp(suffix=".json", dir=root)
    os.close(fd)
    try:
        with open(tmp, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        os.replace(tmp, root / MANIFEST_NAME)
    except Exception:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(
    state: GanState,
    root: Path | str,
    seed: int,
    config_hash: str,
    total_epochs: int,
    lr: float,
    buffer_size: int,
) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    version = f"epoch_{state.epoch:04d}"
    ckpt_dir = root / version
    ckpt_dir.mkdir(parents=True, exist_ok=True)

    for name, net in (("G", state.G), ("F", state.F), ("D_X", state.D_X), ("D_Y", state.D_Y)):
        _atomic_torch_save(net.state_dict(), ckpt_dir / f"{name}.pt")
    training_state = {
        "opt_G": state.opt_G.state_dict(),
        "opt_D": state.opt_D.state_dict(),
        "sched_G": state.sched_G.state_dict(),
        "sched_D": state.sched_D.state_dict(),
        "iteration": state.iteration,
        "epoch": state.epoch,
        "torch_rng": torch.get_rng_state(),
        "pool_rng": state.pool_X.rng.bit_generator.state,
        "pool_X": state.pool_X.state(),
        "pool_Y": state.pool_Y.state(),
    }
    _atomic_torch_save(training_state, ckpt_dir / "training_state.pt")

    manifest_path = root / MANIFEST_NAME
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {
        "seed": seed,
        "config_hash": config_hash,
        "arch": {
            "image_side": state.arch.image_side,
            "ngf": state.arch.ngf,
            "ndf": state.arch.ndf,
            "n_blocks": state.arch.resolved_blocks(),
        },
        "lr": lr,
        "buffer_size": buffer_size,
        "total_epochs": total_epochs,
        "versions": [],
    }
    entry = {"version": version, "epoch": state.epoch, "iteration": state.iteration}
    manifest["versions"] = [v for v in manifest["versions"] if v["version"] != version] + [entry]
    _write_manifest(root, manifest)
    log.info("checkpoint saved: %s (iteration %d)", ckpt_dir, state.iteration)
    return ckpt_dir


def read_manifest(root: Path | str) -> dict:
    manifest_path = Path(root) / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ConfigError(f"no checkpoint manifest under {root}")
    return json.loads(manifest_path.read_text())


def load_checkpoint(root: Path | str, version: str | None = None) -> GanState:
    """Rebuild a GanState from disk; latest version when not named."""
    root = Path(root)
    manifest = read_manifest(root)
    if not manifest["versions"]:
        raise ConfigError(f"checkpoint manifest at {root} lists no versions")
    if version is None:
        version = max(manifest["versions"], key=lambda v: v["epoch"])["version"]
    ckpt_dir = root / version
    if not ckpt_dir.is_dir():
        raise ConfigError(f"checkpoint version directory missing: {ckpt_dir}")

    arch = GanArch(**manifest["arch"])
    state = build_gan_state(
        arch,
        total_epochs=manifest["total_epochs"],
        lr=manifest["lr"],
        buffer_size=manifest["buffer_size"],
        seed=manifest["seed"],
    )
    for name, net in (("G", state.G), ("F", state.F), ("D_X", state.D_X), ("D_Y", state.D_Y)):
        net.load_state_dict(torch.load(ckpt_dir / f"{name}.pt", map_location="cpu", weights_only=True))
    training_state = torch.load(ckpt_dir / "training_state.pt", map_location="cpu", weights_only=False)
    state.opt_G.load_state_dict(training_state["opt_G"])
    state.opt_D.load_state_dict(training_state["opt_D"])
    state.sched_G.load_state_dict(training_state["sched_G"])
    state.sched_D.load_state_dict(training_state["sched_D"])
    state.iteration = training_state["iteration"]
    state.epoch = training_state["epoch"]
    torch.set_rng_state(training_state["torch_rng"])
    state.pool_X.rng.bit_generator.state = training_state["pool_rng"]
    state.pool_X.load_state(training_state["pool_X"])
    state.pool_Y.load_state(training_state["pool_Y"])
    return state


def load_generator(root: Path | str, direction: str = "a2b") -> tuple[torch.nn.Module, dict]:
    """Load just the generator needed for one-way translation."""
    root = Path(root)
    manifest = read_manifest(root)
    version = max(manifest["versions"], key=lambda v: v["epoch"])["version"]
    name = "G" if direction == "a2b" else "F"
    arch = GanArch(**manifest["arch"])
    net = build_generator(arch.image_side, arch.ngf, arch.resolved_blocks())
    net.load_state_dict(torch.load(root / version / f"{name}.pt", map_location="cpu", weights_only=True))
    net.eval()
    return net, manifest
