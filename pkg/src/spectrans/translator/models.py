"""
U-Net generator and patch discriminator.
"""

from dataclasses import dataclass

import numpy as np
from pydantic import ConfigDict

from spectrans.autodiff import functional as F
from spectrans.autodiff.layers import (
    Conv2d,
    ConvTranspose2d,
    Initializer,
    Module,
)
from spectrans.autodiff.tensor import Tensor
from spectrans.core.errors import ConfigError, ContractError
from spectrans.utils.misc import derived_seed

MAX_CHANNEL_FACTOR = 8
LEAKY_SLOPE = 0.2


def level_channels(base: int, level: int) -> int:
    """
    Number of channels at encoder level `level` (starting at 1): the base
    count doubles at each level, up to eight times the base.
    """
    return base * min(2 ** (level - 1), MAX_CHANNEL_FACTOR)


def _check_kernel(kernel: int) -> None:
    if kernel < 2 or kernel % 2 != 0:
        raise ConfigError(
            "invalid_kernel", f"Kernel must be even and >= 2, got {kernel}."
        )


#####
##### Generator
#####


@dataclass(frozen=True)
class UNetConfig:
    """
    Attributes:
        image_size: Height and width of images (a power of two).
        depth: Number of down-sampling (and up-sampling) levels.
        base_channels: Channels of the first encoder level.
        kernel: Square kernel size (even).
        in_channels: Channels of input images.
        out_channels: Channels of output images.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    image_size: int = 64
    depth: int = 4
    base_channels: int = 32
    kernel: int = 4
    in_channels: int = 1
    out_channels: int = 1

    def __post_init__(self):
        s = self.image_size
        if s < 2 or s & (s - 1) != 0:
            raise ConfigError("invalid_image_size", f"{s} is not 2^k.")
        if self.depth < 1 or s < 2**self.depth:
            raise ConfigError(
                "invalid_depth", f"Depth {self.depth} too large for {s}."
            )
        _check_kernel(self.kernel)
        if min(self.base_channels, self.in_channels, self.out_channels) < 1:
            raise ConfigError("invalid_channels", str(self))


class Generator(Module):
    """
    U-Net: `depth` stride-2 convolutions, a mirrored stack of transposed
    convolutions, and skip connections concatenating each encoder output
    with the decoder input at the same resolution. Hidden levels use
    instance normalisation (except for the outermost and innermost
    levels) and the output goes through `tanh`.
    """

    def __init__(self, config: UNetConfig, seed: int, dropout_p: float = 0.0):
        c = config
        init = Initializer(seed)
        k, pad = c.kernel, (c.kernel - 2) // 2
        chans = [c.in_channels] + [
            level_channels(c.base_channels, i) for i in range(1, c.depth + 1)
        ]
        self.config = config
        self.dropout_p = dropout_p
        self.rng: np.random.Generator | None = None
        self.encoders = [
            Conv2d(init, chans[i - 1], chans[i], k, 2, pad)
            for i in range(1, c.depth + 1)
        ]
        self.decoders: list[ConvTranspose2d] = []
        for i in range(c.depth, 0, -1):
            cin = chans[i] if i == c.depth else 2 * chans[i]
            cout = chans[i - 1] if i > 1 else c.out_channels
            self.decoders.append(ConvTranspose2d(init, cin, cout, k, 2, pad))

    def forward(self, x: Tensor) -> Tensor:
        c = self.config
        expected = (c.in_channels, c.image_size, c.image_size)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise ContractError(
                "shape_mismatch",
                f"Generator expects (N, *{expected}), got {x.shape}.",
            )
        skips: list[Tensor] = []
        h = x
        for i, enc in enumerate(self.encoders, start=1):
            h = enc(h)
            if 1 < i < c.depth:
                h = F.instance_norm2d(h)
            h = F.leaky_relu(h, LEAKY_SLOPE)
            skips.append(h)
        skips.pop()
        rng = self.rng if self.training else None
        for dec in self.decoders[:-1]:
            h = dec(h)
            h = F.instance_norm2d(h)
            h = F.dropout(h, self.dropout_p, rng)
            h = F.relu(h)
            h = F.concat([h, skips.pop()], axis=1)
        return F.tanh(self.decoders[-1](h))


def build_generator(
    config: UNetConfig, seed: int = 0, dropout_p: float = 0.0
) -> Generator:
    return Generator(config, seed, dropout_p)


#####
##### Discriminator
#####


@dataclass(frozen=True)
class PatchDiscConfig:
    """
    Attributes:
        layers: Number of stride-2 convolutions.
        base_channels: Channels of the first layer.
        kernel: Square kernel size (even).
        in_channels: Observation channels plus candidate channels.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    layers: int = 3
    base_channels: int = 32
    kernel: int = 4
    in_channels: int = 2

    def __post_init__(self):
        if self.layers < 1:
            raise ConfigError("invalid_layers", str(self.layers))
        _check_kernel(self.kernel)
        if min(self.base_channels, self.in_channels) < 1:
            raise ConfigError("invalid_channels", str(self))

    def channels(self) -> list[int]:
        base = self.base_channels
        hidden = [level_channels(base, i) for i in range(1, self.layers)]
        return [self.in_channels, *hidden, 1]

    def parameter_count(self) -> int:
        ch = self.channels()
        k2 = self.kernel**2
        return sum(a * b * k2 + b for a, b in zip(ch[:-1], ch[1:]))

    def score_size(self, image_size: int) -> int:
        return image_size // 2**self.layers


class Discriminator(Module):
    """
    Patch discriminator over the channel concatenation of an observation
    and a candidate translation. It emits an unbounded score per patch
    (least-squares objective) and uses no normalisation.
    """

    def __init__(self, config: PatchDiscConfig, seed: int):
        init = Initializer(seed)
        k, pad = config.kernel, (config.kernel - 2) // 2
        ch = config.channels()
        self.config = config
        self.convs = [
            Conv2d(init, a, b, k, 2, pad) for a, b in zip(ch[:-1], ch[1:])
        ]

    def forward(self, x: Tensor, y: Tensor) -> Tensor:
        h = F.concat([x, y], axis=1)
        if h.shape[1] != self.config.in_channels:
            raise ContractError(
                "channel_mismatch",
                f"Discriminator expects {self.config.in_channels} channels, "
                + f"got {h.shape[1]}.",
            )
        for i, conv in enumerate(self.convs):
            h = conv(h)
            if i < len(self.convs) - 1:
                h = F.leaky_relu(h, LEAKY_SLOPE)
        return h


def build_discriminator(
    config: PatchDiscConfig, seed: int = 0
) -> Discriminator:
    return Discriminator(config, seed)


def discriminator_seed(seed: int) -> int:
    return derived_seed(seed, 1)
