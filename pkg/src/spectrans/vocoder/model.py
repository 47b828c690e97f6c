"""
A spectrogram-conditioned autoregressive waveform model.

The model maps the previous (μ-law requantised) sample and the current
conditioning vector to a distribution over the μ-law class of the
current sample. It stacks residual layers of dilated causal convolutions
with gated activations, whose dilation doubles within each cycle.
"""

from dataclasses import dataclass

import numpy as np
from pydantic import ConfigDict

from spectrans.autodiff import functional as F
from spectrans.autodiff.layers import CausalConv1d, Initializer, Module
from spectrans.autodiff.tensor import Tensor
from spectrans.core.errors import ConfigError, ContractError
from spectrans.dsp.audio import mu_law_requantize
from spectrans.dsp.images import (
    DEFAULT_DB_CEILING,
    DEFAULT_DB_FLOOR,
    magnitudes_to_pixels,
)
from spectrans.dsp.stft import Spectrogram


@dataclass(frozen=True)
class VocoderConfig:
    """
    Attributes:
        layers_per_cycle: Residual layers per dilation cycle (dilations
            1, 2, ..., 2^(layers_per_cycle - 1)).
        cycles: Number of dilation cycles.
        kernel: Kernel size of dilated convolutions.
        residual_channels: Channels of the residual stream.
        skip_channels: Channels of the skip stream and output head.
        cond_channels: Conditioning channels (the number of mel bins).
        classes: Number of μ-law classes.
        hop: Samples per conditioning frame.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    layers_per_cycle: int = 8
    cycles: int = 2
    kernel: int = 2
    residual_channels: int = 32
    skip_channels: int = 64
    cond_channels: int = 64
    classes: int = 256
    hop: int = 388

    def __post_init__(self):
        if min(self.layers_per_cycle, self.cycles, self.hop) < 1:
            raise ConfigError("invalid_vocoder_config", str(self))
        if self.kernel < 2:
            raise ConfigError("invalid_kernel", str(self.kernel))
        if self.classes < 2:
            raise ConfigError("invalid_classes", str(self.classes))
        channels = (
            self.residual_channels,
            self.skip_channels,
            self.cond_channels,
        )
        if min(channels) < 1:
            raise ConfigError("invalid_channels", str(self))


def receptive_field(c: VocoderConfig) -> int:
    """
    Number of consecutive inputs the output at one time step depends on.
    """
    return c.cycles * (2**c.layers_per_cycle - 1) * (c.kernel - 1) + 1


#####
##### Conditioning
#####


@dataclass(frozen=True, eq=False)
class ConditioningTrack:
    """
    Per-sample conditioning vectors.

    Attributes:
        values: Array of shape (channels, samples).
        hop: Samples per conditioning frame.
    """

    values: np.ndarray
    hop: int

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.values.shape[1]

    def fitted(self, n: int) -> "ConditioningTrack":
        """
        Crop to `n` samples, or extend by holding the last vector.
        """
        if n <= len(self):
            return ConditioningTrack(self.values[:, :n], self.hop)
        extra = np.repeat(self.values[:, -1:], n - len(self), axis=1)
        return ConditioningTrack(
            np.concatenate([self.values, extra], axis=1), self.hop
        )


def conditioning_features(
    mel: Spectrogram,
    db_floor: float = DEFAULT_DB_FLOOR,
    db_ceiling: float = DEFAULT_DB_CEILING,
) -> np.ndarray:
    """
    Log-compressed mel frames with values in [-1, 1], of shape
    (bins, frames).
    """
    if mel.scale != "mel":
        raise ContractError("not_mel", "Conditioning needs mel frames.")
    return magnitudes_to_pixels(mel.magnitudes.T, db_floor, db_ceiling)


def upsample_conditioning(
    mel: Spectrogram,
    hop: int,
    db_floor: float = DEFAULT_DB_FLOOR,
    db_ceiling: float = DEFAULT_DB_CEILING,
) -> ConditioningTrack:
    """
    Hold each frame's features for `hop` samples, so that sample `t`
    sees frame `t // hop`.
    """
    if hop < 1:
        raise ConfigError("invalid_hop", str(hop))
    feats = conditioning_features(mel, db_floor, db_ceiling)
    return ConditioningTrack(np.repeat(feats, hop, axis=1), hop)


#####
##### Model
#####


class ResidualLayer(Module):
    def __init__(self, init: Initializer, c: VocoderConfig, dilation: int):
        r = c.residual_channels
        self.filter = CausalConv1d(init, r, r, c.kernel, dilation)
        self.gate = CausalConv1d(init, r, r, c.kernel, dilation)
        self.cond_filter = CausalConv1d(init, c.cond_channels, r)
        self.cond_gate = CausalConv1d(init, c.cond_channels, r)
        self.residual = CausalConv1d(init, r, r)
        self.skip = CausalConv1d(init, r, c.skip_channels)

    def apply(self, h: Tensor, cond: Tensor) -> tuple[Tensor, Tensor]:
        """
        Returns:
            The updated residual stream and the skip contribution.
        """
        z = F.gated_activation(
            self.filter(h) + self.cond_filter(cond),
            self.gate(h) + self.cond_gate(cond),
        )
        return h + self.residual(z), self.skip(z)


class Vocoder(Module):
    def __init__(self, config: VocoderConfig, seed: int = 0):
        c = config
        init = Initializer(seed)
        self.config = config
        self.input = CausalConv1d(init, 1, c.residual_channels)
        self.layers = [
            ResidualLayer(init, c, 2**i)
            for _ in range(c.cycles)
            for i in range(c.layers_per_cycle)
        ]
        self.head = CausalConv1d(init, c.skip_channels, c.skip_channels)
        self.output = CausalConv1d(init, c.skip_channels, c.classes)

    def forward(self, u: Tensor, cond: Tensor) -> Tensor:
        """
        Compute class logits.

        Arguments:
            u: Previous samples, of shape (N, 1, T): `u[..., t]` is the
                requantised sample `t - 1` (0 for `t = 0`).
            cond: Conditioning of shape (N, cond_channels, T).

        Returns:
            Logits of shape (N, classes, T).
        """
        c = self.config
        if u.ndim != 3 or u.shape[1] != 1:
            raise ContractError("shape_mismatch", f"Input {u.shape}.")
        expected = (u.shape[0], c.cond_channels, u.shape[2])
        if cond.shape != expected:
            raise ContractError(
                "shape_mismatch",
                f"Conditioning {cond.shape}, expected {expected}.",
            )
        h = self.input(u)
        skips: Tensor | None = None
        for layer in self.layers:
            h, s = layer.apply(h, cond)
            skips = s if skips is None else skips + s
        assert skips is not None
        out = self.head(F.relu(skips))
        return self.output(F.relu(out))


def build_vocoder(config: VocoderConfig, seed: int = 0) -> Vocoder:
    return Vocoder(config, seed)


def shifted_input(x: np.ndarray, classes: int) -> np.ndarray:
    """
    Autoregressive input for samples `x`: the requantised sample
    preceding each position, with 0 before the first one.
    """
    u = np.zeros(len(x))
    if len(x) > 1:
        u[1:] = mu_law_requantize(x[:-1], classes)
    return u
