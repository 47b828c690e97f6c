"""
Teacher-forced training of the vocoder.
"""

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ConfigDict

from spectrans.autodiff import functional as F
from spectrans.autodiff.optim import AdamState, adam_step
from spectrans.autodiff.params import load_module, save_module
from spectrans.autodiff.tensor import Tensor, no_grad
from spectrans.core.errors import (
    ConfigError,
    ContractError,
    DegenerateInputError,
    FormatError,
    NumericError,
)
from spectrans.core.traces import Tracer, log_to
from spectrans.dsp.audio import Waveform, mu_law_encode
from spectrans.dsp.frontend import AudioConfig, Frontend, ImageConfig
from spectrans.dsp.stft import StftParams
from spectrans.translator.checkpoints import checkpoint_paths
from spectrans.utils.misc import derived_seed
from spectrans.utils.typing import (
    ValidationError,
    dump_typed,
    load_typed,
    read_document,
    write_json,
)
from spectrans.vocoder.model import (
    ConditioningTrack,
    Vocoder,
    VocoderConfig,
    build_vocoder,
    receptive_field,
    shifted_input,
)


@dataclass(frozen=True)
class VocoderTrainConfig:
    """
    Attributes:
        steps: Number of optimisation steps.
        lr: Adam learning rate.
        segment_samples: Length of the random excerpt trained on at each
            step (whole examples when shorter).
        seed: Seeds initialisation and excerpt selection.
        checkpoint_every: Interval between intermediate checkpoints, or
            0 for none.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    steps: int = 2000
    lr: float = 1e-3
    segment_samples: int = 4096
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.segment_samples < 1:
            raise ConfigError("invalid_vocoder_train", str(self))
        if self.lr <= 0 or self.checkpoint_every < 0:
            raise ConfigError("invalid_vocoder_train", str(self))


@dataclass(frozen=True, eq=False)
class VocoderExample:
    audio: Waveform
    cond: ConditioningTrack


def _inputs(
    M: Vocoder, audio: Waveform, cond: ConditioningTrack
) -> tuple[Tensor, Tensor, np.ndarray]:
    c = M.config
    if len(audio) != len(cond):
        raise ContractError(
            "length_mismatch",
            f"{len(audio)} samples for {len(cond)} conditioning vectors.",
        )
    if len(audio) < receptive_field(c):
        raise ContractError(
            "too_short",
            f"{len(audio)} samples, receptive field {receptive_field(c)}.",
        )
    if cond.channels != c.cond_channels:
        raise ContractError(
            "channel_mismatch",
            f"Conditioning has {cond.channels} channels, "
            + f"model expects {c.cond_channels}.",
        )
    x = audio.samples
    u = Tensor(shifted_input(x, c.classes)[None, None])
    return u, Tensor(cond.values[None]), mu_law_encode(x, c.classes)[None]


def nll_teacher_forced(
    M: Vocoder, audio: Waveform, cond: ConditioningTrack
) -> Tensor:
    """
    Mean cross-entropy of the μ-law class of every sample given the
    ground-truth past and the conditioning, computed in parallel over
    time.

    Raises:
        ContractError: lengths differ or are below the receptive field.
    """
    u, c, targets = _inputs(M, audio, cond)
    return F.softmax_cross_entropy(M(u, c), targets)


def nll_per_sample(
    M: Vocoder, audio: Waveform, cond: ConditioningTrack
) -> np.ndarray:
    """
    Negative log-likelihood of each sample under teacher forcing.
    """
    u, c, targets = _inputs(M, audio, cond)
    with no_grad():
        logits = M(u, c).values[0]
    z = logits - logits.max(axis=0, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=0, keepdims=True))
    return -logp[targets[0], np.arange(logits.shape[1])]


def _segment(
    ex: VocoderExample, length: int, rng: np.random.Generator
) -> tuple[Waveform, ConditioningTrack]:
    n = len(ex.audio)
    if n <= length:
        return ex.audio, ex.cond
    start = int(rng.integers(0, n - length + 1))
    audio = ex.audio.with_samples(ex.audio.samples[start : start + length])
    cond = ConditioningTrack(
        ex.cond.values[:, start : start + length], ex.cond.hop
    )
    return audio, cond


def train_vocoder(
    examples: Sequence[VocoderExample],
    config: VocoderConfig,
    t_cfg: VocoderTrainConfig,
    *,
    tracer: Tracer | None = None,
    on_status: Callable[[str], None] | None = None,
    on_checkpoint: Callable[[int, Vocoder, dict[str, list[float]]], None]
    | None = None,
) -> tuple[Vocoder, dict[str, list[float]]]:
    """
    Train a vocoder on random excerpts of (audio, conditioning) pairs.

    Returns:
        The trained model and its loss history.

    Raises:
        DegenerateInputError: no examples are given.
        NumericError: the loss became non-finite.
    """
    if not examples:
        raise DegenerateInputError("empty_dataset", "No vocoder examples.")
    M = build_vocoder(config, t_cfg.seed)
    M.train()
    opt = AdamState(t_cfg.lr)
    rng = np.random.default_rng(derived_seed(t_cfg.seed, 3))
    history: dict[str, list[float]] = {"step": [], "loss": []}
    log_to(
        tracer,
        "info",
        "vocoder_training_started",
        {
            "examples": len(examples),
            "steps": t_cfg.steps,
            "receptive_field": receptive_field(config),
        },
    )
    for step in range(1, t_cfg.steps + 1):
        ex = examples[int(rng.integers(0, len(examples)))]
        audio, cond = _segment(ex, t_cfg.segment_samples, rng)
        loss = nll_teacher_forced(M, audio, cond)
        value = loss.item()
        if not math.isfinite(value):
            raise NumericError("non_finite_loss", f"At step {step}.")
        loss.backward()
        adam_step(M.parameters(), opt)
        history["step"].append(float(step))
        history["loss"].append(value)
        log_to(tracer, "trace", "vocoder_step", {"step": step, "loss": value})
        if on_status is not None:
            on_status(f"step {step}/{t_cfg.steps} loss={value:.4f}")
        every = t_cfg.checkpoint_every
        if on_checkpoint is not None and every > 0 and step % every == 0:
            on_checkpoint(step, M, history)
    M.eval()
    meta = {"loss": history["loss"][-1]}
    log_to(tracer, "info", "vocoder_training_done", meta)
    return M, history


#####
##### Checkpoints
#####


@dataclass(frozen=True)
class VocoderSidecar:
    """
    Attributes:
        config: Model architecture.
        train: Training configuration.
        audio: Audio front-end configuration of the training data.
        image: Image configuration (conditioning normalisation).
        stft: STFT parameters of the conditioning frames.
        cascade: Whether conditioning came from translator outputs
            rather than ground-truth spectrograms.
        history: Loss history.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    config: VocoderConfig
    train: VocoderTrainConfig
    audio: AudioConfig
    image: ImageConfig
    stft: StftParams
    cascade: bool
    history: dict[str, list[float]]

    def frontend(self) -> Frontend:
        return Frontend(self.audio, self.image, self.stft)


def save_vocoder(M: Vocoder, sidecar: VocoderSidecar, path: Path) -> Path:
    params, meta = checkpoint_paths(path)
    save_module(M, params)
    write_json(meta, dump_typed(VocoderSidecar, sidecar))
    return meta


def load_vocoder(path: Path) -> tuple[Vocoder, VocoderSidecar]:
    """
    Raises:
        FormatError: malformed sidecar or parameters not matching it.
    """
    params, meta = checkpoint_paths(path)
    try:
        sidecar = load_typed(VocoderSidecar, read_document(meta))
    except ValidationError as e:
        raise FormatError("invalid_sidecar", f"{meta}: {e}")
    M = build_vocoder(sidecar.config)
    load_module(M, params)
    M.eval()
    return M, sidecar
