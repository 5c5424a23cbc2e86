"""Generator and discriminator architectures.

Residual-block generator with two downsampling stages (9 blocks for 256
inputs, 6 for 128 and below) and a 70x70 patch discriminator, matching
the standard unpaired-translation setup this model inherits.
"""

import torch
import torch.nn as nn


def _norm(channels: int) -> nn.Module:
    return nn.InstanceNorm2d(channels, affine=False, track_running_stats=False)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            _norm(channels),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            _norm(channels),
        )

    def forward(self, x):
        return x + self.block(x)


class ResnetGenerator(nn.Module):
    """c7s1-ngf, two stride-2 downsamplers, n residual blocks, two
    upsamplers, c7s1-3 with tanh output in [-1, 1]."""

    def __init__(self, ngf: int = 64, n_blocks: int = 6, in_channels: int = 3):
        super().__init__()
        layers = [
            nn.ReflectionPad2d(3),
            nn.Conv2d(in_channels, ngf, 7),
            _norm(ngf),
            nn.ReLU(inplace=True),
        ]
        channels = ngf
        for _ in range(2):
            layers += [
                nn.Conv2d(channels, channels * 2, 3, stride=2, padding=1),
                _norm(channels * 2),
                nn.ReLU(inplace=True),
            ]
            channels *= 2
        layers += [ResidualBlock(channels) for _ in range(n_blocks)]
        for _ in range(2):
            layers += [
                nn.ConvTranspose2d(channels, channels // 2, 3, stride=2, padding=1, output_padding=1),
                _norm(channels // 2),
                nn.ReLU(inplace=True),
            ]
            channels //= 2
        layers += [
            nn.ReflectionPad2d(3),
            nn.Conv2d(channels, in_channels, 7),
            nn.Tanh(),
        ]
        self.model = nn.Sequential(*layers)

    def forward(self, x):
        return self.model(x)


class PatchDiscriminator(nn.Module):
    """Patch-level real/fake critic; 3 stride-2 layers give the 70x70
    receptive field. Raw (unbounded) outputs suit the least-squares loss."""

    def __init__(self, ndf: int = 64, n_layers: int = 3, in_channels: int = 3):
        super().__init__()
        layers = [
            nn.Conv2d(in_channels, ndf, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
        ]
        mult = 1
        for n in range(1, n_layers):
            prev, mult = mult, min(2 ** n, 8)
            layers += [
                nn.Conv2d(ndf * prev, ndf * mult, 4, stride=2, padding=1),
                _norm(ndf * mult),
                nn.LeakyReLU(0.2, inplace=True),
            ]
        prev, mult = mult, min(2 ** n_layers, 8)
        layers += [
            nn.Conv2d(ndf * prev, ndf * mult, 4, stride=1, padding=1),
            _norm(ndf * mult),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(ndf * mult, 1, 4, stride=1, padding=1),
        ]
        self.model = nn.Sequential(*layers)

    def forward(self, x):
        return self.model(x)


def init_weights(net: nn.Module, std: float = 0.02) -> nn.Module:
    """Gaussian(0, 0.02) init for conv layers, the customary GAN start."""

    def _init(m):
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)

    net.apply(_init)
    return net


def default_n_blocks(image_side: int) -> int:
    return 9 if image_side >= 256 else 6


def build_generator(image_side: int, ngf: int = 64, n_blocks: int | None = None) -> ResnetGenerator:
    blocks = default_n_blocks(image_side) if n_blocks is None else n_blocks
    return init_weights(ResnetGenerator(ngf=ngf, n_blocks=blocks))


def build_discriminator(ndf: int = 64) -> PatchDiscriminator:
    return init_weights(PatchDiscriminator(ndf=ndf))


def count_parameters(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters())
