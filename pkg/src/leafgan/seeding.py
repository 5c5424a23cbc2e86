"""Seed fan-out: one root seed deterministically derives per-stage seeds.

Every stage (dataset assembly, classifier training, GAN training, ...)
gets its own stream so that adding work to one stage never perturbs
another.
"""

import hashlib
import random

import numpy as np
import torch

_STAGES = (
    "datakit",
    "lflseg",
    "gan",
    "eval",
    "synthetic",
)


def stage_seed(root_seed: int, stage: str) -> int:
    """Derive a 31-bit seed for a named stage from the root seed."""
    digest = hashlib.sha256(f"{root_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


def stage_rng(root_seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng(stage_seed(root_seed, stage))


def seed_everything(seed: int) -> None:
    """Seed python, numpy and torch global state (used before model init)."""
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)
