"""
End-to-end runs of the command line tools on tiny configurations.
"""

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from spectrans.__main__ import SpectransCLI
from spectrans.core.errors import ConfigError, ContractError
from spectrans.datagen.datasets import load_dataset
from spectrans.datagen.scores import parse_score
from spectrans.dsp.audio import Waveform, read_wav, write_wav
from spectrans.dsp.images import save_png
from spectrans.scripts.commands import (
    cmd_baselines,
    cmd_datagen,
    cmd_evaluate,
    cmd_evaluate_model,
    cmd_pitch_track,
    cmd_train_translator,
    cmd_train_vocoder,
    cmd_translate,
)
from spectrans.scripts.load_configs import RunConfig, load_run_config
from spectrans.translator.checkpoints import read_sidecar

pytestmark = pytest.mark.slow

TINY_RUN = """
audio:
  chunk_ms: 400
image:
  size: 16
dataset:
  task: pitch_track
  n_scores: 2
  notes_per_score: 3
generator:
  image_size: 16
  depth: 2
  base_channels: 4
discriminator:
  layers: 2
  base_channels: 4
train:
  steps: 4
vocoder:
  layers_per_cycle: 3
  cycles: 1
  residual_channels: 4
  skip_channels: 8
  classes: 16
vocoder_train:
  steps: 3
  segment_samples: 256
"""


@dataclass(frozen=True)
class _Run:
    root: Path
    config_file: Path
    config: RunConfig
    data: Path
    pairs: int
    translator: Path
    train_pairs: int
    held_out_pairs: int


def _tone(path: Path, seconds: float, rate: int = 16000) -> Path:
    t = np.arange(int(seconds * rate)) / rate
    write_wav(Waveform(0.5 * np.sin(2 * np.pi * 440 * t), rate), path)
    return path


def _with_task(config: RunConfig, task: str, n_scores: int) -> RunConfig:
    dataset = replace(config.dataset, n_scores=n_scores)
    return replace(config, task=task, dataset=dataset)  # type: ignore


@pytest.fixture(scope="module")
def run(tmp_path_factory: pytest.TempPathFactory) -> _Run:
    root = tmp_path_factory.mktemp("run")
    config_file = root / "run.yaml"
    config_file.write_text(TINY_RUN)
    config = load_run_config(config_file)
    data = cmd_datagen(config, root / "data")
    trained = cmd_train_translator(config, data.manifest, root / "gan")
    return _Run(
        root=root,
        config_file=config_file,
        config=config,
        data=data.manifest,
        pairs=data.pairs,
        translator=trained.checkpoint,
        train_pairs=trained.train_pairs,
        held_out_pairs=trained.held_out_pairs,
    )


#####
##### Data and training
#####


def test_datagen(run: _Run):
    assert run.data.exists()
    assert (run.data.parent / "config.json").exists()
    d = load_dataset(run.data)
    assert len(d) == run.pairs
    assert d.task == "pitch_track"
    assert {p.score_index for p in d.pairs} == {0, 1}


def test_train_translator(run: _Run):
    out = run.translator.parent
    history = pd.read_csv(out / "history.csv")  # type: ignore
    assert list(history.columns) == ["step", "loss_d", "loss_adv", "loss_l1"]
    assert len(history) == 4
    assert (out / "history.png").exists()
    assert run.train_pairs > 0 and run.held_out_pairs > 0
    assert run.train_pairs + run.held_out_pairs == run.pairs
    sidecar = read_sidecar(run.translator)
    assert sidecar.adversarial and sidecar.step == 4
    assert len(sidecar.train_pair_ids) == run.train_pairs


def test_train_baseline(run: _Run, tmp_path: Path):
    res = cmd_train_translator(run.config, run.data, tmp_path, baseline=True)
    sidecar = read_sidecar(res.checkpoint)
    assert not sidecar.adversarial and sidecar.discriminator is None
    assert set(sidecar.history) == {"step", "loss_l1"}


def test_train_vocoder(run: _Run, tmp_path: Path):
    res = cmd_train_vocoder(run.config, run.data, tmp_path / "gt")
    assert not res.cascade and res.examples == run.pairs
    cascade = cmd_train_vocoder(
        run.config, run.data, tmp_path / "cascade", translator=run.translator
    )
    assert cascade.cascade and cascade.examples == run.held_out_pairs
    manifest = yaml.safe_load((tmp_path / "cascade/cascade.json").read_text())
    assert len(manifest["pair_ids"]) == run.held_out_pairs


#####
##### Translation
#####


def test_translate_with_griffin_lim(run: _Run, tmp_path: Path):
    wav = _tone(tmp_path / "in.wav", 0.5)
    res = cmd_translate(run.config, run.translator, wav, tmp_path / "out")
    names = [p.name for p in res.images]
    assert names == ["predicted_mel.png", "linear_0.png"]
    out = read_wav(res.audio)
    assert len(out) == 8000 and out.sample_rate_hz == 16000
    assert res.duration_s == 0.5 and res.realtime_factor > 0


def test_translate_resamples_input(run: _Run, tmp_path: Path):
    wav = _tone(tmp_path / "in.wav", 0.5, rate=8000)
    res = cmd_translate(run.config, run.translator, wav, tmp_path / "out")
    assert read_wav(res.audio).sample_rate_hz == 16000


def test_translate_with_vocoder(run: _Run, tmp_path: Path):
    voc = cmd_train_vocoder(run.config, run.data, tmp_path / "voc")
    wav = _tone(tmp_path / "in.wav", 0.1)
    res = cmd_translate(
        run.config,
        run.translator,
        wav,
        tmp_path / "out",
        method="vocoder",
        vocoder=voc.checkpoint,
        f=4.0,
    )
    assert len(read_wav(res.audio)) == 1600
    names = [p.name for p in res.images]
    assert names == ["predicted_mel.png", "linear_0.png"]


def test_translate_with_restorers(run: _Run, tmp_path: Path):
    config = _with_task(run.config, "restore_linear", 2)
    data = cmd_datagen(config, tmp_path / "data")
    restorer = cmd_train_translator(config, data.manifest, tmp_path / "r")
    wav = _tone(tmp_path / "in.wav", 0.5)
    res = cmd_translate(
        run.config,
        run.translator,
        wav,
        tmp_path / "out",
        method="gl2",
        restorers=[restorer.checkpoint],
    )
    names = [p.name for p in res.images]
    assert names == ["predicted_mel.png", "linear_0.png", "linear_1.png"]
    with pytest.raises(ConfigError):
        cmd_translate(
            run.config, run.translator, wav, tmp_path / "bad", method="gl2"
        )


def test_pitch_track(run: _Run, tmp_path: Path):
    wav = _tone(tmp_path / "in.wav", 0.8)
    res = cmd_pitch_track(run.config, run.translator, wav, tmp_path / "out")
    assert parse_score(res.score.read_text()) == list(res.notes)
    frames = pd.read_csv(res.frames)  # type: ignore
    assert list(frames.columns) == ["frame_index", "bin", "voiced"]
    assert np.array_equal(frames["voiced"], frames["bin"] >= 0)
    assert (tmp_path / "out" / "pitch.png").exists()


#####
##### Evaluation
#####


def test_evaluate_model(run: _Run, tmp_path: Path):
    res = cmd_evaluate_model(run.config, run.translator, run.data, tmp_path)
    assert res.report.pitch is not None
    assert len(res.summary) == run.held_out_pairs + 1
    assert res.summary.index[-1] == "mean"
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "summary.csv").exists()
    every = cmd_evaluate_model(
        run.config, run.translator, run.data, tmp_path / "all", all_pairs=True
    )
    assert len(every.summary) == run.pairs + 1


@pytest.mark.parametrize("jobs", [2, 3])
def test_parallel_evaluation_matches_serial(
    run: _Run, tmp_path: Path, jobs: int
):
    serial = cmd_evaluate_model(
        run.config, run.translator, run.data, tmp_path / "1", all_pairs=True
    )
    parallel = cmd_evaluate_model(
        run.config,
        run.translator,
        run.data,
        tmp_path / "n",
        all_pairs=True,
        jobs=jobs,
    )
    assert parallel.report == serial.report
    assert parallel.summary.equals(serial.summary)  # type: ignore


def test_evaluate_images(run: _Run, tmp_path: Path):
    d = load_dataset(run.data)
    for p in d.pairs[:3]:
        save_png(p.target, tmp_path / "pred" / f"{p.pair_id}.png")
        save_png(p.target, tmp_path / "truth" / f"{p.pair_id}.png")
    res = cmd_evaluate(
        run.config, [tmp_path / "pred"], [tmp_path / "truth"], tmp_path
    )
    assert res.report.l1_percent == 0.0
    assert res.report.ssim == pytest.approx(1.0)
    parallel = cmd_evaluate(
        run.config,
        [tmp_path / "pred"],
        [tmp_path / "truth"],
        tmp_path / "parallel",
        jobs=2,
    )
    assert parallel.report == res.report
    assert parallel.summary.equals(res.summary)  # type: ignore
    with pytest.raises(ContractError):
        cmd_evaluate(
            run.config,
            [tmp_path / "pred"],
            [tmp_path / "truth" / f"{d.pairs[0].pair_id}.png"],
            tmp_path / "bad",
        )


def test_baselines(run: _Run, tmp_path: Path):
    config = _with_task(run.config, "super_resolve", 1)
    data = cmd_datagen(config, tmp_path / "data")
    res = cmd_baselines(config, data.manifest, tmp_path / "out")
    assert {"linear", "cubic", "mean"} <= set(res.summary.index)
    with pytest.raises(ContractError):
        cmd_baselines(run.config, run.data, tmp_path / "bad")


#####
##### Command line class
#####


def test_cli_class(
    run: _Run, tmp_path: Path, capsys: pytest.CaptureFixture[str]
):
    cli = SpectransCLI(config=str(run.config_file), seed=1, no_status=True)
    cli.datagen(out=str(tmp_path / "data"))
    assert "pair(s) from 2 score(s)" in capsys.readouterr().out
    log = yaml.safe_load((tmp_path / "data" / "log.yaml").read_text())
    assert "dataset_written" in [m["message"] for m in log]
    resolved = load_run_config(tmp_path / "data" / "config.json")
    assert resolved.seeds.data == 1
    with pytest.raises(ConfigError):
        SpectransCLI(log_level="verbose")
