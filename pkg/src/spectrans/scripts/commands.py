"""
Implementation of the command line tools.

Each command takes a run configuration and explicit paths, writes its
artifacts and the resolved configuration into an output directory, and
returns a summary of what it did.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from spectrans.core.errors import (
    ConfigError,
    ContractError,
    DegenerateInputError,
)
from spectrans.core.traces import ExportableLogMessage, Tracer, log_to
from spectrans.datagen.datasets import (
    Pair,
    PairedDataset,
    SubTask,
    Task,
    dataset_scores,
    load_dataset,
    make_task_dataset,
    save_dataset,
    split_dataset,
)
from spectrans.datagen.scores import NoteEvent, format_score
from spectrans.dsp.audio import (
    Waveform,
    read_wav,
    resample_cubic,
    resample_linear,
    write_wav,
)
from spectrans.dsp.frontend import Frontend, ImageConfig
from spectrans.dsp.images import SpectroImage, load_image, save_png
from spectrans.metrics.pitch import (
    DEFAULT_MIN_FRAMES,
    UNVOICED,
    decode_pitch,
    extract_notes,
    notes_to_events,
    pitch_stats,
)
from spectrans.metrics.reports import (
    EvalReport,
    image_report,
    mean_report,
    summary_table,
    write_report,
)
from spectrans.metrics.separation import bss_ratios
from spectrans.scripts.load_configs import (
    RunConfig,
    discriminator_config,
    generator_config,
    translator_train_config,
    vocoder_config,
    vocoder_train_config,
    write_resolved_config,
)
from spectrans.scripts.recipes import (
    Reconstructed,
    Reconstruction,
    held_out_pairs,
    linear_image,
    reconstruct_gl,
    reconstruct_gl2,
    reconstruct_vocoder,
    recording_input,
    vocoder_examples,
    write_history,
)
from spectrans.translator.checkpoints import (
    TranslatorSidecar,
    load_checkpoint,
    save_checkpoint,
)
from spectrans.translator.inference import translate_image
from spectrans.translator.models import Generator
from spectrans.translator.training import (
    History,
    train,
    train_autoencoder_baseline,
)
from spectrans.utils.typing import dump_typed, write_json
from spectrans.vocoder.generation import Selection
from spectrans.vocoder.model import Vocoder
from spectrans.vocoder.training import (
    VocoderSidecar,
    load_vocoder,
    save_vocoder,
    train_vocoder,
)

LOG_FILE = "log.yaml"
TRANSLATOR_STEM = "translator"
VOCODER_STEM = "vocoder"
CASCADE_FILE = "cascade.json"

type StatusFn = Callable[[str], None]


def write_log(tracer: Tracer, out_dir: Path) -> Path:
    """
    Dump the messages of a tracer as `log.yaml`, without timing
    information so that identical runs produce identical logs.
    """
    messages = list(tracer.export_log(remove_timing_info=True))
    data = dump_typed(list[ExportableLogMessage], messages)
    path = out_dir / LOG_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(data, f, sort_keys=False)
    return path


def _task_config(config: RunConfig, d: PairedDataset) -> RunConfig:
    """
    Take the task from the dataset unless the configuration sets one.
    """
    if config.task is None:
        return replace(config, task=d.task)
    if config.task != d.task:
        raise ConfigError(
            "task_mismatch",
            f"Configured for {config.task}, dataset is for {d.task}.",
        )
    return config


#####
##### Dataset generation
#####


@dataclass(frozen=True)
class DatagenOutcome:
    manifest: Path
    scores: int
    pairs: int


def cmd_datagen(
    config: RunConfig,
    out_dir: Path,
    *,
    jobs: int = 1,
    tracer: Tracer | None = None,
) -> DatagenOutcome:
    """
    Render the configured scores into a dataset for the configured task.
    """
    write_resolved_config(config, out_dir)
    fe = config.frontend()
    seed = config.seeds.data
    scores = dataset_scores(config.dataset, seed)
    d = make_task_dataset(
        config.resolved_task,
        scores,
        config.dataset.timbres,
        config.dataset,
        fe,
        seed,
        jobs=jobs,
        tracer=tracer,
    )
    save_dataset(d, out_dir, scores)
    log_to(tracer, "info", "dataset_written", {"dir": str(out_dir)})
    return DatagenOutcome(out_dir / "manifest.json", len(scores), len(d))


#####
##### Training
#####


@dataclass(frozen=True)
class TrainOutcome:
    checkpoint: Path
    steps: int
    train_pairs: int
    held_out_pairs: int
    final_l1: float


def split_for_training(
    d: PairedDataset, fraction: float, seed: int
) -> tuple[PairedDataset, PairedDataset]:
    """
    Split a dataset by score, or train on everything when `fraction` is
    at least 1.
    """
    if fraction >= 1:
        return d, d.with_pairs([])
    return split_dataset(d, fraction, seed)


def cmd_train_translator(
    config: RunConfig,
    manifest: Path,
    out_dir: Path,
    *,
    baseline: bool = False,
    tracer: Tracer | None = None,
    on_status: StatusFn | None = None,
) -> TrainOutcome:
    """
    Train a translator on the training split of a dataset.

    With `baseline`, the discriminator is dropped and the generator is
    trained on the L1 objective alone.
    """
    d = load_dataset(manifest)
    config = _task_config(config, d)
    write_resolved_config(config, out_dir)
    fraction = config.dataset.train_fraction
    train_set, held = split_for_training(d, fraction, config.seeds.split)
    g_cfg = generator_config(config)
    d_cfg = None if baseline else discriminator_config(config)
    t_cfg = translator_train_config(config)
    ids = tuple(p.pair_id for p in train_set.pairs)

    def sidecar(step: int, history: History) -> TranslatorSidecar:
        return TranslatorSidecar.describe(
            d.description, g_cfg, d_cfg, t_cfg, step, history, ids
        )

    def on_checkpoint(step: int, G: Generator, history: History) -> None:
        path = out_dir / "checkpoints" / f"step_{step:06d}"
        save_checkpoint(G, sidecar(step, history), path)

    if d_cfg is None:
        result = train_autoencoder_baseline(
            train_set,
            g_cfg,
            t_cfg,
            tracer=tracer,
            on_status=on_status,
            on_checkpoint=on_checkpoint,
        )
    else:
        result = train(
            train_set,
            g_cfg,
            d_cfg,
            t_cfg,
            tracer=tracer,
            on_status=on_status,
            on_checkpoint=on_checkpoint,
        )
    path = out_dir / TRANSLATOR_STEM
    final = sidecar(t_cfg.steps, result.history)
    save_checkpoint(result.generator, final, path)
    write_history(result.history, out_dir)
    return TrainOutcome(
        checkpoint=path,
        steps=t_cfg.steps,
        train_pairs=len(train_set),
        held_out_pairs=len(held),
        final_l1=result.history["loss_l1"][-1],
    )


@dataclass(frozen=True)
class CascadeManifest:
    """
    The pairs a vocoder was trained on and the translator whose
    predictions conditioned it (if any).
    """

    translator: str | None
    pair_ids: tuple[str, ...]


@dataclass(frozen=True)
class VocoderOutcome:
    checkpoint: Path
    examples: int
    cascade: bool
    final_loss: float


def cmd_train_vocoder(
    config: RunConfig,
    manifest: Path,
    out_dir: Path,
    *,
    translator: Path | None = None,
    tracer: Tracer | None = None,
    on_status: StatusFn | None = None,
) -> VocoderOutcome:
    """
    Train a vocoder on the target audio of a dataset.

    With a translator checkpoint (cascade training), the conditioning is
    the translator's prediction for the pairs it was not trained on.
    Otherwise, all pairs are used with their target spectrograms.
    """
    d = load_dataset(manifest)
    config = _task_config(config, d)
    write_resolved_config(config, out_dir)
    fe = d.description.frontend()
    G = None
    pairs: Sequence[Pair] = d.pairs
    if translator is not None:
        G, side = load_checkpoint(translator)
        if side.task != d.task:
            raise ContractError(
                "task_mismatch",
                f"Translator trained for {side.task}, dataset is for "
                + f"{d.task}.",
            )
        pairs = held_out_pairs(d, side.train_pair_ids)
        if not pairs:
            raise DegenerateInputError(
                "no_held_out_pairs",
                "The translator was trained on every pair of the dataset.",
            )
    cascade = CascadeManifest(
        translator=str(translator) if translator is not None else None,
        pair_ids=tuple(p.pair_id for p in pairs),
    )
    write_json(out_dir / CASCADE_FILE, dump_typed(CascadeManifest, cascade))
    examples = vocoder_examples(fe, pairs, G)
    v_cfg = vocoder_config(config, fe)
    t_cfg = vocoder_train_config(config)

    def sidecar(history: dict[str, list[float]]) -> VocoderSidecar:
        return VocoderSidecar(
            config=v_cfg,
            train=t_cfg,
            audio=fe.audio,
            image=fe.image,
            stft=fe.params,
            cascade=G is not None,
            history={k: list(v) for k, v in history.items()},
        )

    def on_checkpoint(
        step: int, M: Vocoder, history: dict[str, list[float]]
    ) -> None:
        path = out_dir / "checkpoints" / f"step_{step:06d}"
        save_vocoder(M, sidecar(history), path)

    M, history = train_vocoder(
        examples,
        v_cfg,
        t_cfg,
        tracer=tracer,
        on_status=on_status,
        on_checkpoint=on_checkpoint,
    )
    path = out_dir / VOCODER_STEM
    save_vocoder(M, sidecar(history), path)
    write_history(history, out_dir)
    return VocoderOutcome(
        checkpoint=path,
        examples=len(examples),
        cascade=G is not None,
        final_loss=history["loss"][-1],
    )


#####
##### Translation
#####


@dataclass(frozen=True)
class TranslateOutcome:
    """
    Attributes:
        audio: Path of the reconstructed WAV file.
        images: Paths of the emitted images, predicted mel first.
        duration_s: Duration of the input recording.
        elapsed_s: Processing time.
    """

    audio: Path
    images: tuple[Path, ...]
    duration_s: float
    elapsed_s: float

    @property
    def realtime_factor(self) -> float:
        """
        Seconds of audio processed per second of computation.
        """
        return self.duration_s / max(self.elapsed_s, 1e-9)


def _load_translator(
    checkpoint: Path, subtask: SubTask | None
) -> tuple[Generator, TranslatorSidecar]:
    G, side = load_checkpoint(checkpoint)
    if side.task == "joint" and subtask is None:
        raise ConfigError(
            "missing_subtask",
            "Joint translators need --subtask "
            + "(pitch_track, source_separate, super_resolve or synthesize).",
        )
    return G, side


def _translate_recording(
    G: Generator,
    side: TranslatorSidecar,
    w: Waveform,
    subtask: SubTask | None,
) -> tuple[SpectroImage, Waveform]:
    fe = side.frontend()
    img, reference = recording_input(
        fe, w, side.task, subtask=subtask, layout=side.joint_layout
    )
    return translate_image(G, img), reference


def cmd_translate(
    config: RunConfig,
    checkpoint: Path,
    in_wav: Path,
    out_dir: Path,
    *,
    method: Reconstruction = "gl",
    restorers: Sequence[Path] = (),
    vocoder: Path | None = None,
    f: float = 1.0,
    mode: Selection = "mode",
    subtask: SubTask | None = None,
    iterations: int = 32,
    tracer: Tracer | None = None,
    on_status: StatusFn | None = None,
) -> TranslateOutcome:
    """
    Translate a recording and reconstruct audio from the prediction.

    Emits `predicted_mel.png`, one `linear_<k>.png` per linear
    spectrogram along the reconstruction path (the last one being the
    spectrogram of the output audio for the vocoder) and `output.wav`.

    Arguments:
        method: `gl` (rescaling and Griffin-Lim), `gl2` (rescaling,
            restoration translators, Griffin-Lim) or `vocoder`.
        restorers: Restoration checkpoints for `gl2`, applied in order
            (`paths.restorers` by default).
        vocoder: Vocoder checkpoint (`paths.vocoder` by default).
        f: Teacher weight of vocoder generation, pulling the output
            towards the input recording (1 for no pull).
        mode: Selection of vocoder samples.
        subtask: Sub-task of joint translators.
    """
    write_resolved_config(config, out_dir)
    start = time.perf_counter()
    G, side = _load_translator(checkpoint, subtask)
    fe = side.frontend()
    w = read_wav(in_wav)
    pred, reference = _translate_recording(G, side, w, subtask)
    mel = fe.spectrogram(pred)
    n = len(reference)
    rec: Reconstructed
    match method:
        case "gl":
            rec = reconstruct_gl(fe, mel, n, iterations)
        case "gl2":
            paths = restorers or [Path(p) for p in config.paths.restorers]
            stages = [load_checkpoint(p)[0] for p in paths]
            rec = reconstruct_gl2(fe, mel, stages, n, iterations)
        case "vocoder":
            vpath = vocoder or config.paths.vocoder
            if vpath is None:
                raise ConfigError(
                    "missing_vocoder", "Method vocoder needs a checkpoint."
                )
            M, vside = load_vocoder(Path(vpath))

            def progress(t: int, total: int) -> None:
                if on_status is not None:
                    on_status(f"Generating: {t}/{total} samples")

            rec = reconstruct_vocoder(
                fe,
                mel,
                M,
                vside,
                reference,
                f,
                config.seeds.generation,
                mode,
                tracer=tracer,
                on_progress=progress,
            )
    images = [out_dir / "predicted_mel.png"]
    save_png(pred, images[0])
    for k, s in enumerate(rec.linear):
        images.append(out_dir / f"linear_{k}.png")
        save_png(linear_image(fe, s), images[-1])
    audio = out_dir / "output.wav"
    write_wav(rec.audio, audio)
    elapsed = time.perf_counter() - start
    outcome = TranslateOutcome(
        audio=audio,
        images=tuple(images),
        duration_s=len(w) / w.sample_rate_hz,
        elapsed_s=elapsed,
    )
    meta = {"method": method, "realtime_factor": outcome.realtime_factor}
    log_to(tracer, "info", "translation_done", meta)
    return outcome


#####
##### Pitch tracking
#####


@dataclass(frozen=True)
class PitchOutcome:
    notes: tuple[NoteEvent, ...]
    score: Path
    frames: Path


def cmd_pitch_track(
    config: RunConfig,
    checkpoint: Path,
    in_wav: Path,
    out_dir: Path,
    *,
    min_frames: int = DEFAULT_MIN_FRAMES,
    tracer: Tracer | None = None,
) -> PitchOutcome:
    """
    Transcribe a recording with a pitch-tracking (or joint) translator.

    Writes the notes in the score text format (`notes.txt`), the
    per-frame track as `frames.csv` (`frame_index,bin,voiced`) and the
    predicted image (`pitch.png`).
    """
    write_resolved_config(config, out_dir)
    G, side = load_checkpoint(checkpoint)
    if side.task not in ("pitch_track", "joint"):
        raise ContractError(
            "not_a_pitch_tracker", f"Translator trained for {side.task}."
        )
    subtask: SubTask | None = "pitch_track" if side.task == "joint" else None
    fe = side.frontend()
    pred, _ = _translate_recording(G, side, read_wav(in_wav), subtask)
    save_png(pred, out_dir / "pitch.png")
    bins = decode_pitch(pred)
    frame_ms = 1000 * fe.params.hop / fe.sample_rate_hz
    notes = notes_to_events(
        extract_notes(bins, min_frames), fe.filterbank, frame_ms
    )
    score = out_dir / "notes.txt"
    score.write_text(format_score(notes))
    frames = out_dir / "frames.csv"
    table = pd.DataFrame(
        {
            "frame_index": np.arange(len(bins)),
            "bin": bins,
            "voiced": (bins != UNVOICED).astype(int),
        }
    )
    table.to_csv(frames, index=False)  # type: ignore
    log_to(tracer, "info", "pitch_tracked", {"notes": len(notes)})
    return PitchOutcome(tuple(notes), score, frames)


#####
##### Evaluation
#####


REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.csv"


@dataclass(frozen=True)
class EvaluateOutcome:
    report: EvalReport
    summary: pd.DataFrame


def _write_evaluation(
    reports: dict[str, EvalReport],
    groups: dict[str, list[str]],
    out_dir: Path,
) -> EvaluateOutcome:
    """
    Write the mean report and a summary table with one row per pair
    followed by one row per group of pairs.
    """
    if not reports:
        raise DegenerateInputError("nothing_to_evaluate", "No pairs.")
    overall = mean_report(list(reports.values()))
    rows = dict(reports)
    for name, keys in groups.items():
        rows[name] = mean_report([reports[k] for k in keys])
    rows["mean"] = overall
    table = summary_table(rows)
    write_report(overall, out_dir / REPORT_FILE)
    table.to_csv(out_dir / SUMMARY_FILE)  # type: ignore
    return EvaluateOutcome(overall, table)


def _files(paths: Sequence[Path]) -> list[Path]:
    """
    Expand directories into their sorted image files.
    """
    out: list[Path] = []
    for p in paths:
        if p.is_dir():
            found = [*p.glob("*.png"), *p.glob("*.f32")]
            out.extend(sorted(found))
        else:
            out.append(p)
    return out


def _map_jobs[J, R](
    fn: Callable[[J], R], work: Sequence[J], jobs: int
) -> list[R]:
    """
    Apply a module-level function to every job, in worker processes when
    `jobs > 1`. Results keep the order of `work`.
    """
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            return list(executor.map(fn, work))
    return [fn(job) for job in work]


def _chunks[T](items: Sequence[T], n: int) -> list[Sequence[T]]:
    """
    Split into at most `n` contiguous, non-empty, nearly equal chunks.
    """
    size = max(1, -(-len(items) // max(n, 1)))
    return [items[i : i + size] for i in range(0, len(items), size)]


@dataclass(frozen=True)
class _ImageJob:
    pred: Path
    truth: Path
    task: Task
    image: ImageConfig


def _run_image_job(job: _ImageJob) -> EvalReport:
    img = job.image

    def load(p: Path) -> SpectroImage:
        return load_image(p, 1, img.size, img.db_floor, img.db_ceiling)

    a, b = load(job.pred), load(job.truth)
    pitch = None
    if job.task == "pitch_track":
        pitch = pitch_stats(decode_pitch(a), decode_pitch(b))
    return image_report(a, b, pitch=pitch)


def cmd_evaluate(
    config: RunConfig,
    pred: Sequence[Path],
    truth: Sequence[Path],
    out_dir: Path,
    *,
    task: Task | None = None,
    jobs: int = 1,
) -> EvaluateOutcome:
    """
    Compare predicted images with ground-truth images, pairing files in
    order (directories expand to their sorted `.png` and `.f32` files).

    Pitch statistics are added for the pitch tracking task. With
    `jobs > 1`, files are compared in parallel worker processes.

    Raises:
        ContractError: the lists differ in length.
    """
    write_resolved_config(config, out_dir)
    preds, truths = _files(pred), _files(truth)
    if len(preds) != len(truths):
        raise ContractError(
            "misaligned_lists",
            f"{len(preds)} predictions for {len(truths)} ground truths.",
        )
    task = task or config.resolved_task
    work = [
        _ImageJob(pred=p, truth=t, task=task, image=config.image)
        for p, t in zip(preds, truths)
    ]
    found = _map_jobs(_run_image_job, work, jobs)
    reports = {p.stem: r for p, r in zip(preds, found)}
    return _write_evaluation(reports, {}, out_dir)


def _pair_report(
    fe: Frontend, G: Generator, p: Pair, task: Task, iterations: int
) -> EvalReport:
    pred = translate_image(G, p.input)
    kind = p.subtask or task
    pitch = bss = None
    if kind == "pitch_track":
        pitch = pitch_stats(decode_pitch(pred), decode_pitch(p.target))
    if kind == "source_separate" and p.target_audio is not None:
        target = p.target_audio
        est = reconstruct_gl(
            fe, fe.spectrogram(pred), len(target), iterations
        ).audio
        bss = bss_ratios(est, target, p.stems)
    return image_report(pred, p.target, pitch=pitch, bss=bss)


@dataclass(frozen=True)
class _PairJob:
    checkpoint: Path
    fe: Frontend
    pairs: tuple[Pair, ...]
    task: Task
    iterations: int


def _run_pair_job(job: _PairJob) -> list[EvalReport]:
    G, _ = load_checkpoint(job.checkpoint)
    return [
        _pair_report(job.fe, G, p, job.task, job.iterations)
        for p in job.pairs
    ]


def cmd_evaluate_model(
    config: RunConfig,
    checkpoint: Path,
    manifest: Path,
    out_dir: Path,
    *,
    all_pairs: bool = False,
    iterations: int = 32,
    jobs: int = 1,
    tracer: Tracer | None = None,
    on_status: StatusFn | None = None,
) -> EvaluateOutcome:
    """
    Evaluate a translator on the pairs of a dataset it was not trained
    on (or on all of them).

    Separation pairs are also reconstructed with Griffin-Lim and scored
    against their sources; joint datasets get one summary row per
    sub-task. With `jobs > 1`, pairs are evaluated in parallel worker
    processes that each load the checkpoint; reports do not depend on
    `jobs`.
    """
    write_resolved_config(config, out_dir)
    G, side = load_checkpoint(checkpoint)
    d = load_dataset(manifest)
    if side.task != d.task:
        raise ContractError(
            "task_mismatch",
            f"Translator trained for {side.task}, dataset is for {d.task}.",
        )
    fe = d.description.frontend()
    trained = () if all_pairs else side.train_pair_ids
    pairs = held_out_pairs(d, trained)
    reports: dict[str, EvalReport] = {}
    groups: dict[str, list[str]] = {}
    found: list[EvalReport] = []
    if jobs > 1:
        work = [
            _PairJob(checkpoint, fe, tuple(chunk), d.task, iterations)
            for chunk in _chunks(pairs, jobs)
        ]
        chunks = _map_jobs(_run_pair_job, work, jobs)
        found = [r for chunk in chunks for r in chunk]
        if on_status is not None:
            on_status(f"Evaluated: {len(found)} pairs")
    else:
        for i, p in enumerate(pairs):
            found.append(_pair_report(fe, G, p, d.task, iterations))
            if on_status is not None:
                on_status(f"Evaluating: {i + 1}/{len(pairs)} pairs")
    for p, report in zip(pairs, found):
        reports[p.pair_id] = report
        if p.subtask is not None:
            groups.setdefault(p.subtask, []).append(p.pair_id)
    outcome = _write_evaluation(reports, groups, out_dir)
    log_to(tracer, "info", "evaluation_done", {"pairs": len(reports)})
    return outcome


def cmd_baselines(
    config: RunConfig,
    manifest: Path,
    out_dir: Path,
) -> EvaluateOutcome:
    """
    Evaluate linear and cubic B-spline interpolation of the low-rate
    inputs of a super-resolution dataset against its targets.
    """
    write_resolved_config(config, out_dir)
    d = load_dataset(manifest)
    if d.task != "super_resolve":
        raise ContractError(
            "not_super_resolution", f"Dataset is for {d.task}."
        )
    fe = d.description.frontend()
    methods = {"linear": resample_linear, "cubic": resample_cubic}
    reports: dict[str, EvalReport] = {}
    groups: dict[str, list[str]] = {name: [] for name in methods}
    for p in d.pairs:
        assert p.input_audio is not None and p.target_audio is not None
        n = len(p.target_audio)
        for name, resample in methods.items():
            up = resample(p.input_audio, fe.sample_rate_hz).fitted(n)
            key = f"{p.pair_id}_{name}"
            reports[key] = image_report(fe.chunk_image(up), p.target)
            groups[name].append(key)
    return _write_evaluation(reports, groups, out_dir)
