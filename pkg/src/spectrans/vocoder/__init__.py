"""
Spectrogram-conditioned autoregressive waveform generation.
"""

# ruff: noqa: F401
# pyright: reportUnusedImport=false

from spectrans.vocoder.generation import (
    Selection,
    blend,
    generate,
    generate_teacher_weighted,
    step_logits,
)
from spectrans.vocoder.model import (
    ConditioningTrack,
    Vocoder,
    VocoderConfig,
    build_vocoder,
    receptive_field,
    upsample_conditioning,
)
from spectrans.vocoder.training import (
    VocoderExample,
    VocoderSidecar,
    VocoderTrainConfig,
    load_vocoder,
    nll_per_sample,
    nll_teacher_forced,
    save_vocoder,
    train_vocoder,
)
