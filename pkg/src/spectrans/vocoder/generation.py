"""
Sample-by-sample generation, free-running or weighted towards a
reference signal.
"""

from collections.abc import Callable
from typing import Literal

import numpy as np

from spectrans.autodiff.tensor import Tensor, no_grad
from spectrans.core.errors import ConfigError, ContractError
from spectrans.core.traces import Tracer, log_to
from spectrans.dsp.audio import Waveform, mu_law_decode, mu_law_requantize
from spectrans.vocoder.model import ConditioningTrack, Vocoder, receptive_field

type Selection = Literal["mode", "sample"]
"""
How a class is chosen from the predicted distribution: its mode, or a
draw from a seeded generator.
"""


def blend(x: float, y: float, f: float) -> float:
    """
    Weighted average `((f - 1) x + y) / f` of a reference sample `x` and
    a predicted sample `y`.
    """
    return ((f - 1) * x + y) / f


def step_logits(
    M: Vocoder, u: np.ndarray, cond: np.ndarray, t: int
) -> np.ndarray:
    """
    Logits at time `t`, recomputed over the window of the receptive field
    ending at `t`.

    Arguments:
        u: Autoregressive inputs (see `Vocoder.forward`), at least up to
            index `t`.
        cond: Conditioning values of shape (channels, samples).
    """
    start = max(0, t - receptive_field(M.config) + 1)
    with no_grad():
        out = M(
            Tensor(u[None, None, start : t + 1]),
            Tensor(cond[None, :, start : t + 1]),
        )
    return out.values[0, :, -1]


def _select(
    logits: np.ndarray, mode: Selection, rng: np.random.Generator
) -> int:
    if mode == "mode":
        return int(np.argmax(logits))
    p = np.exp(logits - logits.max())
    p /= p.sum()
    return int(rng.choice(len(p), p=p))


def _autoregress(
    M: Vocoder,
    cond: ConditioningTrack,
    n: int,
    seed: int,
    mode: Selection,
    reference: np.ndarray | None,
    f: float,
    prime: Waveform | None,
    sample_rate_hz: int,
    tracer: Tracer | None,
    on_progress: Callable[[int, int], None] | None,
) -> Waveform:
    c = M.config
    if n < 0:
        raise ConfigError("invalid_length", str(n))
    if n > len(cond):
        raise ContractError(
            "conditioning_too_short",
            f"{len(cond)} conditioning vectors for {n} samples.",
        )
    if cond.channels != c.cond_channels:
        raise ContractError(
            "channel_mismatch",
            f"Conditioning has {cond.channels} channels, "
            + f"model expects {c.cond_channels}.",
        )
    rng = np.random.default_rng(seed)
    primed = prime.samples[:n] if prime is not None else np.zeros(0)
    u = np.zeros(n + 1)
    out = np.zeros(n)
    for t in range(n):
        if t < len(primed):
            v = float(np.clip(primed[t], -1.0, 1.0))
        else:
            logits = step_logits(M, u, cond.values, t)
            y = float(mu_law_decode(_select(logits, mode, rng), c.classes))
            v = y if reference is None else blend(reference[t], y, f)
            v = float(np.clip(v, -1.0, 1.0))
        out[t] = v
        u[t + 1] = mu_law_requantize(v, c.classes)
        if on_progress is not None:
            on_progress(t + 1, n)
    log_to(tracer, "debug", "generation_done", {"samples": n, "mode": mode})
    return Waveform(out, sample_rate_hz)


def generate(
    M: Vocoder,
    cond: ConditioningTrack,
    n: int,
    seed: int = 0,
    mode: Selection = "mode",
    *,
    sample_rate_hz: int = 16000,
    prime: Waveform | None = None,
    tracer: Tracer | None = None,
    on_progress: Callable[[int, int], None] | None = None,
) -> Waveform:
    """
    Generate `n` samples one at a time, feeding every emitted sample back
    as the next input.

    Arguments:
        prime: Samples emitted verbatim (teacher-forced) at the start.

    Raises:
        ContractError: the conditioning is shorter than `n`.
    """
    return _autoregress(
        M,
        cond,
        n,
        seed,
        mode,
        None,
        1.0,
        prime,
        sample_rate_hz,
        tracer,
        on_progress,
    )


def generate_teacher_weighted(
    M: Vocoder,
    cond: ConditioningTrack,
    reference: Waveform,
    f: float,
    seed: int = 0,
    mode: Selection = "mode",
    *,
    n: int | None = None,
    prime: Waveform | None = None,
    tracer: Tracer | None = None,
    on_progress: Callable[[int, int], None] | None = None,
) -> Waveform:
    """
    Generate samples pulled towards a reference signal: each prediction
    `y` is replaced by `blend(x, y, f)` where `x` is the reference sample
    at the same time, and the blended value is both emitted and fed back.
    With `f = 1`, this is exactly `generate`.

    Arguments:
        n: Number of samples (by default, the reference length).

    Raises:
        ConfigError: `f < 1`.
        ContractError: the reference or conditioning is too short.
    """
    if not f >= 1:
        raise ConfigError("invalid_teacher_weight", f"f = {f} < 1")
    if n is None:
        n = len(reference)
    if len(reference) < n:
        raise ContractError(
            "reference_too_short", f"{len(reference)} samples for {n}."
        )
    return _autoregress(
        M,
        cond,
        n,
        seed,
        mode,
        np.asarray(reference.samples),
        f,
        prime,
        reference.sample_rate_hz,
        tracer,
        on_progress,
    )
