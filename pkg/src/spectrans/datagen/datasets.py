"""
Paired spectrogram datasets for every translation task.

Each task renders scores into an (input, target) pair of waveforms,
chunks both identically and images every chunk with the shared
`Frontend`. Generation is a pure function of the scores, the
configuration and the seed.
"""

from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import ConfigDict

from spectrans.core.errors import (
    ConfigError,
    ContractError,
    DegenerateInputError,
)
from spectrans.core.traces import Tracer, log_to
from spectrans.datagen.scores import (
    MAX_PITCH,
    MIN_PITCH,
    NoteEvent,
    format_score,
    parse_score,
    random_score,
    score_duration_ms,
)
from spectrans.datagen.synth import (
    RENDER_PEAK,
    TimbreConfig,
    random_timbre,
    render_blueprint,
    render_instrument,
)
from spectrans.dsp.audio import (
    Waveform,
    chunk,
    decimate,
    mix,
    ms_to_samples,
    read_wav,
    resample_cubic,
    write_wav,
)
from spectrans.dsp.frontend import AudioConfig, Frontend, ImageConfig
from spectrans.dsp.images import (
    SpectroImage,
    load_planes,
    save_planes,
    save_png,
)
from spectrans.dsp.stft import Spectrogram, StftParams
from spectrans.utils.misc import derived_seed
from spectrans.utils.typing import (
    dump_typed,
    load_typed,
    read_document,
    write_json,
)

type Task = Literal[
    "pitch_track",
    "source_separate",
    "super_resolve",
    "synthesize",
    "joint",
    "restore_linear",
]

type SubTask = Literal[
    "pitch_track", "source_separate", "super_resolve", "synthesize"
]

type JointLayout = Literal["channel_zero", "task_channel"]
"""
Input layout of the joint task. With `channel_zero`, the task input
always occupies channel 0. With `task_channel`, it occupies the channel
of its sub-task (pitch tracking, separation, enhancement). Other channels
are constant -1.
"""

JOINT_CHANNELS = 3
JOINT_TASK_CHANNEL: dict[SubTask, int] = {
    "pitch_track": 0,
    "source_separate": 1,
    "synthesize": 2,
    "super_resolve": 2,
}

MANIFEST_FILE = "manifest.json"
MAX_INTERFERERS = 4


@dataclass(frozen=True)
class DatasetConfig:
    """
    Dataset generation settings.

    Attributes:
        task: The translation task.
        n_scores: Number of random scores (ignored if `score_files` is
            not empty).
        notes_per_score: Number of notes in each random score.
        pitch_lo: Lowest pitch of random scores.
        pitch_hi: Highest pitch of random scores.
        tempo_range: Range of random tempos, in beats per minute.
        score_files: Score files to render instead of random scores.
        timbres: Instrument timbres, used in turn for successive scores.
        blueprint_partials: Partials of the synthesis blueprint.
        pitch_partials: Partials of the pitch-tracking target (the
            fundamental alone by default, so that the brightest pixel of
            each frame is the pitch).
        interferers: Interference voices of separation mixtures (1-4).
        interference_gain: Gain of interference voices in mixtures.
        interference_offset: Pitch-range offset of interference voices,
            in semitones (alternately up and down).
        low_rate_hz: Sample rate of super-resolution inputs.
        joint_layout: Input layout of the joint task.
        chunk_hop_ms: Hop between chunks (chunk duration by default).
        train_fraction: Fraction of scores in the training split.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    task: Task = "pitch_track"
    n_scores: int = 8
    notes_per_score: int = 12
    pitch_lo: int = 55
    pitch_hi: int = 79
    tempo_range: tuple[float, float] = (90.0, 150.0)
    score_files: tuple[str, ...] = ()
    timbres: tuple[TimbreConfig, ...] = (TimbreConfig(),)
    blueprint_partials: int = 6
    pitch_partials: int = 1
    interferers: int = 2
    interference_gain: float = 1.0
    interference_offset: int = 12
    low_rate_hz: int = 4000
    joint_layout: JointLayout = "channel_zero"
    chunk_hop_ms: float | None = None
    train_fraction: float = 0.5


@dataclass(frozen=True)
class DatasetDescription:
    """
    Everything needed to interpret the images of a dataset.
    """

    task: Task
    seed: int
    input_channels: int
    height: int
    width: int
    audio: AudioConfig
    image: ImageConfig
    stft: StftParams
    dataset: DatasetConfig

    def frontend(self) -> Frontend:
        return Frontend(self.audio, self.image, self.stft)


@dataclass(frozen=True, eq=False)
class Pair:
    """
    A training example.

    Attributes:
        pair_id: Identifier, unique within the dataset.
        score_index: Index of the score the pair was rendered from.
        chunk_index: Index of the audio chunk within the score.
        input: Input image.
        target: Target image (single channel).
        input_audio: Input audio chunk (at the low sample rate for
            super-resolution).
        target_audio: Target audio chunk.
        stems: Interference stems, for separation pairs.
        subtask: Sub-task of joint pairs.
        band: Frequency band index of restoration pairs.
    """

    pair_id: str
    score_index: int
    chunk_index: int
    input: SpectroImage
    target: SpectroImage
    input_audio: Waveform | None = None
    target_audio: Waveform | None = None
    stems: tuple[Waveform, ...] = ()
    subtask: SubTask | None = None
    band: int | None = None


@dataclass(frozen=True, eq=False)
class PairedDataset:
    """
    A sequence of pairs sharing one image geometry.
    """

    description: DatasetDescription
    pairs: tuple[Pair, ...]

    def __post_init__(self):
        d = self.description
        for p in self.pairs:
            ok = (
                p.input.channels == d.input_channels
                and p.target.channels == 1
                and p.input.pixels.shape[1:] == (d.height, d.width)
                and p.target.pixels.shape[1:] == (d.height, d.width)
            )
            if not ok:
                raise ContractError(
                    "inconsistent_pair_shapes",
                    f"Pair {p.pair_id}: input {p.input.pixels.shape}, "
                    + f"target {p.target.pixels.shape}.",
                    meta=d,
                )

    @property
    def task(self) -> Task:
        return self.description.task

    @property
    def seed(self) -> int:
        return self.description.seed

    def __len__(self) -> int:
        return len(self.pairs)

    def with_pairs(self, pairs: Sequence[Pair]) -> "PairedDataset":
        return PairedDataset(self.description, tuple(pairs))


#####
##### Sources
#####


@dataclass(frozen=True, eq=False)
class Mixture:
    """
    A normalised separation mixture and its scaled sources, such that
    `mixture` is exactly the sum of `target` and `interferences`.
    """

    mixture: Waveform
    target: Waveform
    interferences: tuple[Waveform, ...]


def mix_sources(
    target: Waveform, interferers: Sequence[Waveform], gain: float
) -> Mixture:
    """
    Sum a target and interference voices (scaled by `gain`), then scale
    the mixture and every source by the factor that brings the mixture
    peak to 0.9.
    """
    stems = [target] + [w.with_samples(gain * w.samples) for w in interferers]
    raw = mix(stems, [1.0] * len(stems))
    peak = float(np.max(np.abs(raw.samples)))
    if peak == 0.0:
        raise DegenerateInputError("silent_mixture")
    scale = RENDER_PEAK / peak
    scaled = [w.with_samples(scale * w.samples) for w in stems]
    return Mixture(
        mixture=raw.with_samples(scale * raw.samples),
        target=scaled[0],
        interferences=tuple(scaled[1:]),
    )


def zero_above(s: Spectrogram, cutoff_hz: float) -> Spectrogram:
    """
    Zero the linear bins whose centre frequency exceeds `cutoff_hz`.
    """
    assert s.scale == "linear"
    freqs = np.arange(s.bins) * s.sample_rate_hz / s.params.fft_size
    mags = s.magnitudes.copy()
    mags[:, freqs > cutoff_hz] = 0.0
    return s.with_magnitudes(mags)


def compose_joint_input(
    img: SpectroImage, subtask: SubTask, layout: JointLayout
) -> SpectroImage:
    """
    Lay out a single-channel task input as a joint model input.
    """
    channel = 0 if layout == "channel_zero" else JOINT_TASK_CHANNEL[subtask]
    pixels = -np.ones((JOINT_CHANNELS, img.height, img.width))
    pixels[channel] = img.pixels[0]
    return img.with_pixels(pixels)


def joint_subtask(score_index: int) -> SubTask:
    """
    Sub-task of a score in the joint dataset: pitch tracking, separation
    and enhancement in turn, enhancement alternating between synthesis
    and super-resolution.
    """
    match score_index % 3:
        case 0:
            return "pitch_track"
        case 1:
            return "source_separate"
        case _:
            enhance = (score_index // 3) % 2
            return "synthesize" if enhance == 0 else "super_resolve"


def _interferer_score(
    notes: Sequence[NoteEvent],
    cfg: DatasetConfig,
    seed: int,
    index: int,
    k: int,
) -> list[NoteEvent]:
    sign = 1 if k % 2 == 1 else -1
    shift = sign * cfg.interference_offset * ((k + 1) // 2)
    lo = min(max(cfg.pitch_lo + shift, MIN_PITCH), MAX_PITCH)
    hi = min(max(cfg.pitch_hi + shift, MIN_PITCH), MAX_PITCH)
    return random_score(
        derived_seed(seed, index, k), len(notes), lo, hi, cfg.tempo_range
    )


#####
##### Rendering pairs
#####


def pair_id(score_index: int, chunk_index: int) -> str:
    return f"s{score_index:03d}_c{chunk_index:03d}"


def _chunks(fe: Frontend, cfg: DatasetConfig, w: Waveform) -> list[Waveform]:
    hop_ms = cfg.chunk_hop_ms or fe.audio.chunk_ms
    return chunk(w, fe.audio.chunk_ms, hop_ms)


def _image_pairs(
    fe: Frontend,
    cfg: DatasetConfig,
    index: int,
    inp: Waveform,
    tgt: Waveform,
    stems: Sequence[Waveform] = (),
) -> list[Pair]:
    ins = _chunks(fe, cfg, inp)
    tgts = _chunks(fe, cfg, tgt)
    stem_chunks = [_chunks(fe, cfg, s) for s in stems]
    return [
        Pair(
            pair_id=pair_id(index, c),
            score_index=index,
            chunk_index=c,
            input=fe.chunk_image(x),
            target=fe.chunk_image(y),
            input_audio=x,
            target_audio=y,
            stems=tuple(sc[c] for sc in stem_chunks),
        )
        for c, (x, y) in enumerate(zip(ins, tgts))
    ]


def _super_resolve_pairs(
    fe: Frontend, cfg: DatasetConfig, index: int, tgt: Waveform
) -> list[Pair]:
    pairs: list[Pair] = []
    for c, y in enumerate(_chunks(fe, cfg, tgt)):
        low = decimate(y, cfg.low_rate_hz)
        up = resample_cubic(low, fe.sample_rate_hz).fitted(len(y))
        linear = zero_above(fe.linear(up, fe.size), cfg.low_rate_hz / 2)
        pairs.append(
            Pair(
                pair_id=pair_id(index, c),
                score_index=index,
                chunk_index=c,
                input=fe.image_of(fe.to_mel(linear)),
                target=fe.chunk_image(y),
                input_audio=low,
                target_audio=y,
            )
        )
    return pairs


def _restoration_pairs(
    fe: Frontend, cfg: DatasetConfig, index: int, tgt: Waveform
) -> list[Pair]:
    pairs: list[Pair] = []
    for c, y in enumerate(_chunks(fe, cfg, tgt)):
        linear = fe.linear(y, fe.size)
        rescaled = fe.from_mel(fe.to_mel(linear))
        for b, (xb, yb) in enumerate(
            zip(fe.bands(rescaled), fe.bands(linear))
        ):
            pairs.append(
                Pair(
                    pair_id=f"{pair_id(index, c)}_b{b}",
                    score_index=index,
                    chunk_index=c,
                    input=xb,
                    target=yb,
                    target_audio=y,
                    band=b,
                )
            )
    return pairs


def _render_score(
    task: SubTask | Literal["restore_linear"],
    index: int,
    notes: Sequence[NoteEvent],
    timbre: TimbreConfig,
    cfg: DatasetConfig,
    fe: Frontend,
    seed: int,
) -> list[Pair]:
    sr = fe.sample_rate_hz
    n = ms_to_samples(score_duration_ms(notes), sr)
    instrument = render_instrument(notes, timbre, sr, length=n)
    match task:
        case "pitch_track":
            target = render_blueprint(notes, sr, cfg.pitch_partials, length=n)
            return _image_pairs(fe, cfg, index, instrument, target)
        case "synthesize":
            bp = render_blueprint(notes, sr, cfg.blueprint_partials, length=n)
            return _image_pairs(fe, cfg, index, bp, instrument)
        case "source_separate":
            voices = [
                render_instrument(
                    _interferer_score(notes, cfg, seed, index, k),
                    random_timbre(derived_seed(seed, index, 100 + k)),
                    sr,
                    length=n,
                )
                for k in range(1, cfg.interferers + 1)
            ]
            m = mix_sources(instrument, voices, cfg.interference_gain)
            return _image_pairs(
                fe, cfg, index, m.mixture, m.target, m.interferences
            )
        case "super_resolve":
            return _super_resolve_pairs(fe, cfg, index, instrument)
        case "restore_linear":
            return _restoration_pairs(fe, cfg, index, instrument)


@dataclass(frozen=True)
class _ScoreJob:
    task: Task
    index: int
    notes: tuple[NoteEvent, ...]
    timbre: TimbreConfig
    cfg: DatasetConfig
    fe: Frontend
    seed: int


def _run_job(job: _ScoreJob) -> list[Pair]:
    args = (job.index, job.notes, job.timbre, job.cfg, job.fe, job.seed)
    if job.task != "joint":
        return _render_score(job.task, *args)
    subtask = joint_subtask(job.index)
    pairs = _render_score(subtask, *args)
    layout = job.cfg.joint_layout
    return [
        replace(
            p,
            input=compose_joint_input(p.input, subtask, layout),
            subtask=subtask,
        )
        for p in pairs
    ]


def _check_config(cfg: DatasetConfig) -> None:
    if not 1 <= cfg.interferers <= MAX_INTERFERERS:
        raise ConfigError(
            "invalid_interferers",
            f"Separation needs 1 to {MAX_INTERFERERS} interference voices "
            + f"(got {cfg.interferers}).",
        )
    if cfg.interference_offset < 7:
        raise ConfigError(
            "invalid_interference_offset",
            "Interference voices must be offset by at least 7 semitones.",
        )
    if cfg.interference_gain < 0:
        raise ConfigError("invalid_interference_gain")
    if cfg.pitch_partials < 1 or cfg.blueprint_partials < 1:
        raise ConfigError("invalid_partials")


def make_task_dataset(
    task: Task,
    scores: Sequence[Sequence[NoteEvent]],
    timbres: Sequence[TimbreConfig],
    config: DatasetConfig,
    frontend: Frontend,
    seed: int,
    *,
    jobs: int = 1,
    tracer: Tracer | None = None,
) -> PairedDataset:
    """
    Render scores into a paired dataset for a task.

    Scores use the timbres in turn. With `jobs > 1`, scores are rendered
    in parallel worker processes; the pair order does not depend on
    `jobs`.
    """
    if not scores:
        raise DegenerateInputError("no_scores", "Need at least one score.")
    if not timbres:
        raise ConfigError("no_timbres", "Need at least one timbre.")
    _check_config(config)
    work = [
        _ScoreJob(
            task=task,
            index=i,
            notes=tuple(notes),
            timbre=timbres[i % len(timbres)],
            cfg=config,
            fe=frontend,
            seed=seed,
        )
        for i, notes in enumerate(scores)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            rendered = list(executor.map(_run_job, work))
    else:
        rendered = [_run_job(job) for job in work]
    for job, pairs in zip(work, rendered):
        meta = {"score": job.index, "pairs": len(pairs)}
        log_to(tracer, "debug", "score_rendered", meta)
    pairs = tuple(p for ps in rendered for p in ps)
    description = DatasetDescription(
        task=task,
        seed=seed,
        input_channels=JOINT_CHANNELS if task == "joint" else 1,
        height=frontend.size,
        width=frontend.size,
        audio=frontend.audio,
        image=frontend.image,
        stft=frontend.params,
        dataset=replace(config, task=task),
    )
    meta = {"task": task, "scores": len(scores), "pairs": len(pairs)}
    log_to(tracer, "info", "dataset_ready", meta)
    return PairedDataset(description, pairs)


def dataset_scores(cfg: DatasetConfig, seed: int) -> list[list[NoteEvent]]:
    """
    Read the configured score files, or draw `cfg.n_scores` random
    scores deterministically from the seed.
    """
    if cfg.score_files:
        return [parse_score(Path(f).read_text()) for f in cfg.score_files]
    return [
        random_score(
            derived_seed(seed, i),
            cfg.notes_per_score,
            cfg.pitch_lo,
            cfg.pitch_hi,
            cfg.tempo_range,
        )
        for i in range(cfg.n_scores)
    ]


#####
##### Splitting
#####


def split_dataset(
    d: PairedDataset, train_fraction: float, seed: int
) -> tuple[PairedDataset, PairedDataset]:
    """
    Split a dataset at the score level, so that pairs rendered from the
    same score never straddle the split.

    Raises:
        ConfigError: the fraction is not in (0, 1), or there are too
            few scores for both sides to be non-empty.
    """
    if not 0 < train_fraction < 1:
        raise ConfigError("invalid_train_fraction", str(train_fraction))
    scores = sorted({p.score_index for p in d.pairs})
    n_train = round(train_fraction * len(scores))
    if n_train < 1 or n_train > len(scores) - 1:
        raise ConfigError(
            "too_few_scores",
            f"Cannot split {len(scores)} score(s) with train fraction "
            + f"{train_fraction}.",
        )
    perm = np.random.default_rng(seed).permutation(scores)
    train_scores = {int(s) for s in perm[:n_train]}
    train = [p for p in d.pairs if p.score_index in train_scores]
    test = [p for p in d.pairs if p.score_index not in train_scores]
    return d.with_pairs(train), d.with_pairs(test)


#####
##### Files
#####


@dataclass(frozen=True)
class PairFiles:
    """
    Paths of the files of a pair, relative to the manifest directory.
    Images are stored twice: as raw float planes (`.f32`) for training
    and as PNG for inspection.
    """

    pair_id: str
    score_index: int
    chunk_index: int
    input_image: str
    target_image: str
    input_png: str
    target_png: str
    input_audio: str | None = None
    target_audio: str | None = None
    stems: tuple[str, ...] = ()
    subtask: SubTask | None = None
    band: int | None = None


@dataclass(frozen=True)
class Manifest:
    description: DatasetDescription
    scores: tuple[str, ...]
    pairs: tuple[PairFiles, ...]


def _save_audio(
    w: Waveform, rel: str, out_dir: Path, written: set[str]
) -> str:
    if rel not in written:
        write_wav(w, out_dir / rel)
        written.add(rel)
    return rel


def save_dataset(
    d: PairedDataset,
    out_dir: Path,
    scores: Sequence[Sequence[NoteEvent]] = (),
) -> Manifest:
    """
    Write a dataset and its manifest (`manifest.json`). Writing the same
    dataset twice produces identical files.
    """
    written: set[str] = set()
    entries: list[PairFiles] = []
    for p in d.pairs:
        key = pair_id(p.score_index, p.chunk_index)
        files = PairFiles(
            pair_id=p.pair_id,
            score_index=p.score_index,
            chunk_index=p.chunk_index,
            input_image=f"pairs/{p.pair_id}_input.f32",
            target_image=f"pairs/{p.pair_id}_target.f32",
            input_png=f"pairs/{p.pair_id}_input.png",
            target_png=f"pairs/{p.pair_id}_target.png",
            input_audio=None,
            target_audio=None,
            stems=tuple(
                _save_audio(s, f"audio/{key}_stem{k}.wav", out_dir, written)
                for k, s in enumerate(p.stems)
            ),
            subtask=p.subtask,
            band=p.band,
        )
        if p.input_audio is not None:
            rel = _save_audio(
                p.input_audio, f"audio/{key}_input.wav", out_dir, written
            )
            files = replace(files, input_audio=rel)
        if p.target_audio is not None:
            rel = _save_audio(
                p.target_audio, f"audio/{key}_target.wav", out_dir, written
            )
            files = replace(files, target_audio=rel)
        save_planes(p.input, out_dir / files.input_image)
        save_planes(p.target, out_dir / files.target_image)
        save_png(p.input, out_dir / files.input_png)
        save_png(p.target, out_dir / files.target_png)
        entries.append(files)
    score_paths: list[str] = []
    for i, notes in enumerate(scores):
        rel = f"scores/score_{i:03d}.txt"
        (out_dir / "scores").mkdir(parents=True, exist_ok=True)
        (out_dir / rel).write_text(format_score(notes))
        score_paths.append(rel)
    manifest = Manifest(d.description, tuple(score_paths), tuple(entries))
    write_json(out_dir / MANIFEST_FILE, dump_typed(Manifest, manifest))
    return manifest


def read_manifest(path: Path) -> Manifest:
    if path.is_dir():
        path = path / MANIFEST_FILE
    return load_typed(Manifest, read_document(path))


def load_dataset(path: Path) -> PairedDataset:
    """
    Load a dataset from its manifest file (or the directory holding it).
    """
    if path.is_dir():
        path = path / MANIFEST_FILE
    manifest = load_typed(Manifest, read_document(path))
    root = path.parent
    desc = manifest.description
    img = desc.image

    def image(rel: str, channels: int) -> SpectroImage:
        return load_planes(
            root / rel, channels, desc.height, img.db_floor, img.db_ceiling
        )

    def audio(rel: str | None) -> Waveform | None:
        return read_wav(root / rel) if rel else None

    pairs = [
        Pair(
            pair_id=f.pair_id,
            score_index=f.score_index,
            chunk_index=f.chunk_index,
            input=image(f.input_image, desc.input_channels),
            target=image(f.target_image, 1),
            input_audio=audio(f.input_audio),
            target_audio=audio(f.target_audio),
            stems=tuple(read_wav(root / s) for s in f.stems),
            subtask=f.subtask,
            band=f.band,
        )
        for f in manifest.pairs
    ]
    return PairedDataset(desc, tuple(pairs))
