"""The four loss terms of the masked translation objective.

Adversarial terms are least-squares; the discriminators only ever see
mask-gated images, so generated background pixels carry no adversarial
gradient. The background-similarity term penalizes generator-induced
change outside the mask. Reductions are means over batch, channels and
pixels throughout, which keeps the balance weight resolution-independent.
"""

from dataclasses import dataclass

import torch

from ..errors import NonFiniteLossError


@dataclass(frozen=True)
class LossWeights:
    """Shared balance coefficient on the cycle and background terms."""

    lam: float = 10.0

    def __post_init__(self):
        if not (self.lam >= 0.0 and torch.isfinite(torch.tensor(self.lam))):
            raise ValueError(f"lambda must be finite and nonnegative, got {self.lam}")


def _check_finite(value: torch.Tensor, label: str) -> torch.Tensor:
    if not torch.isfinite(value).all():
        raise NonFiniteLossError(f"{label} is non-finite: {value}")
    return value


def apply_mask(images: torch.Tensor, masks: torch.Tensor) -> torch.Tensor:
    """Elementwise gate: mask 0 zeroes the pixel across all channels."""
    if masks.shape[-2:] != images.shape[-2:] or masks.shape[0] != images.shape[0]:
        raise ValueError(
            f"mask/image misalignment: mask {tuple(masks.shape)} vs image {tuple(images.shape)}"
        )
    return images * masks


def adv_loss_G(d_y, y_s: torch.Tensor, x_prime_s: torch.Tensor) -> torch.Tensor:
    """Least-squares adversarial objective for the forward mapping:
    E[(D_Y(y_s) - 1)^2] + E[(D_Y(x'_s))^2]."""
    real_term = _check_finite(torch.as_tensor(d_y(y_s)), "D_Y(real)")
    fake_term = _check_finite(torch.as_tensor(d_y(x_prime_s)), "D_Y(fake)")
    return ((real_term - 1.0) ** 2).mean() + (fake_term ** 2).mean()


def adv_loss_F(d_x, x_s: torch.Tensor, y_prime_s: torch.Tensor) -> torch.Tensor:
    """Mirror of adv_loss_G for the reverse mapping and its discriminator."""
    real_term = _check_finite(torch.as_tensor(d_x(x_s)), "D_X(real)")
    fake_term = _check_finite(torch.as_tensor(d_x(y_prime_s)), "D_X(fake)")
    return ((real_term - 1.0) ** 2).mean() + (fake_term ** 2).mean()


def _mean_l1(a: torch.Tensor, b: torch.Tensor, label: str) -> torch.Tensor:
    if a.shape != b.shape:
        raise ValueError(f"{label}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    return (a - b).abs().mean()


def cycle_loss(g, f, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Mean-L1 round-trip error: |F(G(x)) - x| + |G(F(y)) - y|."""
    rec_x = torch.as_tensor(f(torch.as_tensor(g(x))))
    rec_y = torch.as_tensor(g(torch.as_tensor(f(y))))
    return _mean_l1(rec_x, x, "cycle x") + _mean_l1(rec_y, y, "cycle y")


def bs_loss(
    g,
    f,
    x: torch.Tensor,
    y: torch.Tensor,
    s_x: torch.Tensor,
    s_y: torch.Tensor,
) -> torch.Tensor:
    """Background-similarity: mean-L1 of generator-induced change on the
    inverted-mask (background) region, both directions."""
    fake_y = torch.as_tensor(g(x))
    fake_x = torch.as_tensor(f(y))
    bg_x = apply_mask(fake_y - x, 1.0 - s_x)
    bg_y = apply_mask(fake_x - y, 1.0 - s_y)
    return bg_x.abs().mean() + bg_y.abs().mean()


def total_loss(adv_g, adv_f, cyc, bs, weights: LossWeights) -> torch.Tensor:
    """adv_G + adv_F + lambda * (cycle + background-similarity)."""
    parts = [
        v if isinstance(v, torch.Tensor) else torch.as_tensor(float(v), dtype=torch.float64)
        for v in (adv_g, adv_f, cyc, bs)
    ]
    for label, v in zip(("adv_G", "adv_F", "cycle", "bs"), parts):
        _check_finite(v, label)
    return parts[0] + parts[1] + weights.lam * (parts[2] + parts[3])


def generator_adv_loss(d, fake_masked: torch.Tensor) -> torch.Tensor:
    """Generator-side target: push D's verdict on masked fakes toward 1."""
    out = _check_finite(torch.as_tensor(d(fake_masked)), "D(fake)")
    return ((out - 1.0) ** 2).mean()


def discriminator_loss(d, real_masked: torch.Tensor, fake_masked: torch.Tensor) -> torch.Tensor:
    """Least-squares critic update on mask-gated real/fake pairs, halved to
    slow the discriminator relative to the generators."""
    real_out = _check_finite(torch.as_tensor(d(real_masked)), "D(real)")
    fake_out = _check_finite(torch.as_tensor(d(fake_masked)), "D(fake)")
    return 0.5 * (((real_out - 1.0) ** 2).mean() + (fake_out ** 2).mean())
