"""
Recipes combining trained models: preparing inputs from recordings,
reconstructing audio from translated spectrograms, building cascade
vocoder examples and plotting loss histories.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import matplotlib as mpl
import numpy as np
import pandas as pd

from spectrans.core.errors import ConfigError, ContractError
from spectrans.core.traces import Tracer
from spectrans.datagen.datasets import (
    JointLayout,
    Pair,
    PairedDataset,
    SubTask,
    Task,
    compose_joint_input,
    zero_above,
)
from spectrans.dsp.audio import Waveform, resample_cubic
from spectrans.dsp.frontend import Frontend
from spectrans.dsp.images import SpectroImage, magnitudes_to_pixels
from spectrans.dsp.stft import Spectrogram
from spectrans.translator.inference import refine_linear, translate_image
from spectrans.translator.models import Generator
from spectrans.vocoder.generation import (
    Selection,
    generate_teacher_weighted,
)
from spectrans.vocoder.model import Vocoder, upsample_conditioning
from spectrans.vocoder.training import VocoderExample, VocoderSidecar

mpl.use("agg")
import matplotlib.pyplot as plt  # noqa: E402

type Reconstruction = Literal["gl", "gl2", "vocoder"]

RECONSTRUCTIONS: tuple[Reconstruction, ...] = ("gl", "gl2", "vocoder")


#####
##### Inputs
#####


def recording_input(
    fe: Frontend,
    w: Waveform,
    task: Task,
    *,
    subtask: SubTask | None = None,
    layout: JointLayout = "channel_zero",
) -> tuple[SpectroImage, Waveform]:
    """
    Prepare a recording of any length for translation.

    Recordings at another sample rate are cubic-interpolated to the
    front-end rate; for super-resolution, linear bins above the Nyquist
    frequency of the recording are zeroed as during dataset generation.

    Returns:
        The input image and the recording at the front-end rate (the
        reference signal of teacher-weighted generation).

    Raises:
        ConfigError: a joint input is requested without a sub-task.
    """
    rate = w.sample_rate_hz
    if rate != fe.sample_rate_hz:
        w = resample_cubic(w, fe.sample_rate_hz)
    linear = fe.linear(w)
    if task == "super_resolve" or subtask == "super_resolve":
        linear = zero_above(linear, min(rate, fe.sample_rate_hz) / 2)
    img = fe.image_of(fe.to_mel(linear))
    if task == "joint":
        if subtask is None:
            raise ConfigError(
                "missing_subtask", "Joint translators need a sub-task."
            )
        img = compose_joint_input(img, subtask, layout)
    return img, w


def linear_image(fe: Frontend, s: Spectrogram) -> SpectroImage:
    """
    Image of a linear spectrogram, one row per STFT bin.
    """
    floor, ceiling = fe.image.db_floor, fe.image.db_ceiling
    pixels = magnitudes_to_pixels(s.magnitudes.T, floor, ceiling)
    return SpectroImage(pixels[None], floor, ceiling)


#####
##### Reconstruction
#####


@dataclass(frozen=True, eq=False)
class Reconstructed:
    """
    Attributes:
        audio: The reconstructed waveform.
        linear: Linear spectrograms produced along the way (the rescaled
            one, then the output of each restoration stage).
    """

    audio: Waveform
    linear: Sequence[Spectrogram]


def reconstruct_gl(
    fe: Frontend, mel: Spectrogram, n_samples: int, iterations: int = 32
) -> Reconstructed:
    """
    Rescale a mel spectrogram to linear magnitudes and recover phases
    with Griffin-Lim.
    """
    linear = fe.from_mel(mel)
    audio = fe.griffin_lim(linear, n_samples, iterations)
    return Reconstructed(audio, [linear])


def reconstruct_gl2(
    fe: Frontend,
    mel: Spectrogram,
    stages: Sequence[Generator],
    n_samples: int,
    iterations: int = 32,
) -> Reconstructed:
    """
    Like `reconstruct_gl`, with the rescaled linear spectrogram refined
    by restoration translators before phase recovery.

    Raises:
        ConfigError: no restoration stage is given.
    """
    if not stages:
        raise ConfigError(
            "missing_restorers", "Method gl2 needs restoration checkpoints."
        )
    linear = fe.from_mel(mel)
    refined = refine_linear(stages, linear, fe)
    audio = fe.griffin_lim(refined[-1], n_samples, iterations)
    return Reconstructed(audio, [linear, *refined])


def check_vocoder(fe: Frontend, sidecar: VocoderSidecar) -> None:
    c = sidecar.config
    if c.cond_channels != fe.size or c.hop != fe.params.hop:
        raise ContractError(
            "vocoder_mismatch",
            f"Vocoder conditioned on {c.cond_channels} bins every {c.hop} "
            + f"samples, translator produces {fe.size} bins every "
            + f"{fe.params.hop} samples.",
        )


def reconstruct_vocoder(
    fe: Frontend,
    mel: Spectrogram,
    M: Vocoder,
    sidecar: VocoderSidecar,
    reference: Waveform,
    f: float = 1.0,
    seed: int = 0,
    mode: Selection = "mode",
    *,
    tracer: Tracer | None = None,
    on_progress: Callable[[int, int], None] | None = None,
) -> Reconstructed:
    """
    Generate audio conditioned on a mel spectrogram, pulled towards the
    reference recording with weight `f` (no pull for `f = 1`). The
    output has the length of the reference.
    """
    check_vocoder(fe, sidecar)
    floor, ceiling = fe.image.db_floor, fe.image.db_ceiling
    cond = upsample_conditioning(mel, fe.params.hop, floor, ceiling)
    cond = cond.fitted(len(reference))
    audio = generate_teacher_weighted(
        M,
        cond,
        reference,
        f,
        seed,
        mode,
        tracer=tracer,
        on_progress=on_progress,
    )
    return Reconstructed(audio, [fe.linear(audio)])


#####
##### Vocoder examples
#####


def held_out_pairs(d: PairedDataset, trained: Sequence[str]) -> list[Pair]:
    exclude = set(trained)
    return [p for p in d.pairs if p.pair_id not in exclude]


def vocoder_examples(
    fe: Frontend,
    pairs: Sequence[Pair],
    translator: Generator | None = None,
) -> list[VocoderExample]:
    """
    Pair target audio with mel conditioning: the translator's prediction
    for the pair input (cascade training) or the target image itself.

    Raises:
        ConfigError: some pair has no target audio or no mel target.
    """
    examples: list[VocoderExample] = []
    floor, ceiling = fe.image.db_floor, fe.image.db_ceiling
    for p in pairs:
        if p.target_audio is None or p.band is not None:
            raise ConfigError(
                "no_mel_target",
                f"Pair {p.pair_id} has no mel target with audio.",
            )
        img = p.target
        if translator is not None:
            img = translate_image(translator, p.input)
        mel = fe.spectrogram(img)
        cond = upsample_conditioning(mel, fe.params.hop, floor, ceiling)
        audio = p.target_audio
        examples.append(VocoderExample(audio, cond.fitted(len(audio))))
    return examples


#####
##### Histories
#####


def write_history(history: dict[str, list[float]], out_dir: Path) -> Path:
    """
    Write a loss history as `history.csv` and plot its loss columns in
    `history.png`.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    table = pd.DataFrame(history)
    path = out_dir / "history.csv"
    table.to_csv(path, index=False)  # type: ignore
    plt.figure()
    steps = np.asarray(history["step"])
    for name, values in history.items():
        if name != "step":
            plt.plot(steps, values, label=name, linewidth=0.8)
    plt.xlabel("Step")
    plt.ylabel("Loss")
    plt.gca().grid(True)
    plt.legend(loc=1)
    plt.tight_layout()
    plt.savefig(out_dir / "history.png")
    plt.close("all")
    return path
