"""
Signal processing: audio, STFT, mel filterbanks and spectrogram images.
"""

# ruff: noqa: F401
# pyright: reportUnusedImport=false

from spectrans.dsp.audio import (
    Waveform,
    chunk,
    chunk_count,
    decimate,
    mix,
    ms_to_samples,
    mu_law_decode,
    mu_law_encode,
    mu_law_requantize,
    normalize_peak,
    read_wav,
    resample_cubic,
    resample_linear,
    write_wav,
)
from spectrans.dsp.frontend import (
    AudioConfig,
    Frontend,
    ImageConfig,
    StftPreset,
    resolve_stft,
)
from spectrans.dsp.images import (
    SpectroImage,
    from_image,
    join_bands,
    linear_bands,
    load_image,
    load_planes,
    load_png,
    save_planes,
    save_png,
    to_image,
)
from spectrans.dsp.mel import (
    MelFilterbank,
    from_mel,
    hz_to_mel,
    mel_filterbank,
    mel_to_hz,
    to_mel,
)
from spectrans.dsp.stft import (
    FULL_SCALE_STFT,
    Spectrogram,
    StftParams,
    analyze_frames,
    check_cola,
    desk_stft,
    griffin_lim,
    istft,
    spectral_convergence,
    stft,
    strip_framing,
)