"""
Standard Command Line Tools for Spectrans
"""

import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import fire  # type: ignore

from spectrans.core.errors import ConfigError, SpectransError
from spectrans.core.traces import LogLevel, Tracer, valid_log_level
from spectrans.datagen.datasets import SubTask, Task
from spectrans.scripts.commands import (
    EvaluateOutcome,
    cmd_baselines,
    cmd_datagen,
    cmd_evaluate,
    cmd_evaluate_model,
    cmd_pitch_track,
    cmd_train_translator,
    cmd_train_vocoder,
    cmd_translate,
    write_log,
)
from spectrans.scripts.load_configs import RunConfig, load_run_config
from spectrans.scripts.recipes import Reconstruction
from spectrans.utils.misc import StatusLine
from spectrans.utils.typing import ValidationError
from spectrans.vocoder.generation import Selection

STATUS_REFRESH_PERIOD_IN_SECONDS = 0.5

EXIT_IO_ERROR = 3
EXIT_CONFIG_ERROR = 2


def _paths(files: str | Sequence[str] | None) -> list[Path]:
    if files is None:
        return []
    if isinstance(files, str):
        return [Path(files)]
    return [Path(f) for f in files]


class SpectransCLI:
    """
    The Spectrans Command Line Interface.

    The `spectrans` command line application is generated from the
    `SpectransCLI` class using [fire](https://github.com/google/python-fire).
    Every command writes its artifacts, the resolved configuration
    (`config.json`) and a log (`log.yaml`) into the directory given by
    `--out`.
    """

    def __init__(
        self,
        *,
        config: str | None = None,
        seed: int | None = None,
        log_level: str = "info",
        no_status: bool = False,
    ):
        """
        Arguments:
            config: Path to a JSON or YAML run configuration. Default
                values are used for missing sections.
            seed: If provided, overrides all seeds of the configuration.
            log_level: Minimum level of messages written to `log.yaml`.
            no_status: Do not show the progress line on stderr.
        """
        if not valid_log_level(log_level):
            raise ConfigError("invalid_log_level", log_level)
        self.config_path = Path(config) if config is not None else None
        self.seed = seed
        self.log_level: LogLevel = log_level
        self.no_status = no_status

    def _config(self) -> RunConfig:
        return load_run_config(self.config_path, self.seed)

    def _run[T](
        self, out: str, command: Callable[[RunConfig, Path, Tracer], T]
    ) -> T:
        out_dir = Path(out)
        tracer = Tracer(self.log_level)
        try:
            return command(self._config(), out_dir, tracer)
        finally:
            if out_dir.exists():
                write_log(tracer, out_dir)

    def _status(self) -> StatusLine:
        return StatusLine(
            sys.stderr,
            show=not self.no_status,
            min_period=STATUS_REFRESH_PERIOD_IN_SECONDS,
        )

    def datagen(self, *, out: str, jobs: int = 1):
        """
        Generate a paired dataset for the configured task.

        Arguments:
            out: Output directory (receives `manifest.json`).
            jobs: Number of worker processes rendering scores.
        """
        res = self._run(
            out, lambda c, o, t: cmd_datagen(c, o, jobs=jobs, tracer=t)
        )
        print(f"{res.pairs} pair(s) from {res.scores} score(s)")
        print(f"Manifest: {res.manifest}")

    def train_translator(
        self, manifest: str, *, out: str, baseline: bool = False
    ):
        """
        Train a translator on the training split of a dataset.

        Arguments:
            manifest: Dataset manifest (or its directory).
            out: Output directory.
            baseline: Train the generator alone on the L1 objective.
        """
        status = self._status()
        res = self._run(
            out,
            lambda c, o, t: cmd_train_translator(
                c,
                Path(manifest),
                o,
                baseline=baseline,
                tracer=t,
                on_status=status.on_status,
            ),
        )
        status.done()
        print(
            f"Trained on {res.train_pairs} pair(s) for {res.steps} steps "
            + f"({res.held_out_pairs} held out), final L1 {res.final_l1:.4f}"
        )
        print(f"Checkpoint: {res.checkpoint}")

    def train_vocoder(
        self, manifest: str, *, out: str, translator: str | None = None
    ):
        """
        Train a vocoder on the target audio of a dataset.

        Arguments:
            manifest: Dataset manifest (or its directory).
            out: Output directory.
            translator: Translator checkpoint. If provided, the vocoder
                is conditioned on its predictions for the pairs it was
                not trained on (cascade training).
        """
        status = self._status()
        tpath = Path(translator) if translator is not None else None
        res = self._run(
            out,
            lambda c, o, t: cmd_train_vocoder(
                c,
                Path(manifest),
                o,
                translator=tpath,
                tracer=t,
                on_status=status.on_status,
            ),
        )
        status.done()
        kind = "cascade" if res.cascade else "ground-truth"
        print(
            f"Trained on {res.examples} {kind} example(s), "
            + f"final loss {res.final_loss:.4f}"
        )
        print(f"Checkpoint: {res.checkpoint}")

    def translate(
        self,
        checkpoint: str,
        wav: str,
        *,
        out: str,
        method: Reconstruction = "gl",
        restorers: str | Sequence[str] | None = None,
        vocoder: str | None = None,
        f: float = 1.0,
        mode: Selection = "mode",
        subtask: SubTask | None = None,
        iterations: int = 32,
    ):
        """
        Translate a recording and reconstruct audio from the prediction.

        Arguments:
            checkpoint: Translator checkpoint.
            wav: Input recording.
            out: Output directory.
            method: Reconstruction method (`gl`, `gl2` or `vocoder`).
            restorers: Restoration checkpoints for `gl2`, in order.
            vocoder: Vocoder checkpoint for `vocoder`.
            f: Teacher weight pulling vocoder output towards the input.
            mode: Vocoder sample selection (`mode` or `sample`).
            subtask: Sub-task, for joint translators.
            iterations: Griffin-Lim iterations.
        """
        status = self._status()
        vpath = Path(vocoder) if vocoder is not None else None
        res = self._run(
            out,
            lambda c, o, t: cmd_translate(
                c,
                Path(checkpoint),
                Path(wav),
                o,
                method=method,
                restorers=_paths(restorers),
                vocoder=vpath,
                f=f,
                mode=mode,
                subtask=subtask,
                iterations=iterations,
                tracer=t,
                on_status=status.on_status,
            ),
        )
        status.done()
        print(f"Audio: {res.audio}")
        print(f"Realtime factor: {res.realtime_factor:.2f}x")

    def pitch_track(self, checkpoint: str, wav: str, *, out: str):
        """
        Transcribe a recording into notes.

        Arguments:
            checkpoint: Pitch-tracking or joint translator checkpoint.
            wav: Input recording.
            out: Output directory (receives `notes.txt` and
                `frames.csv`).
        """
        res = self._run(
            out,
            lambda c, o, t: cmd_pitch_track(
                c, Path(checkpoint), Path(wav), o, tracer=t
            ),
        )
        print(res.score.read_text(), end="")

    def _show(self, res: EvaluateOutcome):
        print(res.summary.to_string())  # type: ignore

    def evaluate(
        self,
        pred: str | Sequence[str],
        truth: str | Sequence[str],
        *,
        out: str,
        task: Task | None = None,
        jobs: int = 1,
    ):
        """
        Compare predicted images with ground-truth images.

        Arguments:
            pred: Predicted image files, or directories of them.
            truth: Ground-truth image files, in the same order.
            out: Output directory (receives `report.json` and
                `summary.csv`).
            task: Task of the images (the configured task by default).
            jobs: Number of worker processes comparing images.
        """
        res = self._run(
            out,
            lambda c, o, t: cmd_evaluate(
                c, _paths(pred), _paths(truth), o, task=task, jobs=jobs
            ),
        )
        self._show(res)

    def evaluate_model(
        self,
        checkpoint: str,
        manifest: str,
        *,
        out: str,
        all_pairs: bool = False,
        jobs: int = 1,
    ):
        """
        Evaluate a translator on the held-out pairs of a dataset.

        Arguments:
            checkpoint: Translator checkpoint.
            manifest: Dataset manifest (or its directory).
            out: Output directory.
            all_pairs: Evaluate on training pairs too.
            jobs: Number of worker processes evaluating pairs.
        """
        status = self._status()
        res = self._run(
            out,
            lambda c, o, t: cmd_evaluate_model(
                c,
                Path(checkpoint),
                Path(manifest),
                o,
                all_pairs=all_pairs,
                jobs=jobs,
                tracer=t,
                on_status=status.on_status,
            ),
        )
        status.done()
        self._show(res)

    def baselines(self, manifest: str, *, out: str):
        """
        Evaluate interpolation baselines on a super-resolution dataset.
        """
        res = self._run(
            out, lambda c, o, t: cmd_baselines(c, Path(manifest), o)
        )
        self._show(res)


def main():
    try:
        fire.Fire(SpectransCLI)  # type: ignore
    except SpectransError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    except ValidationError as e:
        print(f"Invalid configuration: {e}", file=sys.stderr)
        sys.exit(EXIT_CONFIG_ERROR)
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        sys.exit(EXIT_IO_ERROR)


if __name__ == "__main__":
    main()
