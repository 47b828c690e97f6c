"""
Loading run configuration files
"""

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal

from pydantic import ConfigDict

from spectrans.core.errors import ConfigError
from spectrans.datagen.datasets import JOINT_CHANNELS, DatasetConfig, Task
from spectrans.dsp.frontend import (
    AudioConfig,
    Frontend,
    ImageConfig,
    StftPreset,
)
from spectrans.dsp.stft import StftParams
from spectrans.translator.models import PatchDiscConfig, UNetConfig
from spectrans.translator.training import TrainConfig
from spectrans.utils.typing import (
    dump_typed,
    load_typed,
    read_document,
    write_json,
)
from spectrans.vocoder.model import VocoderConfig
from spectrans.vocoder.training import VocoderTrainConfig

RESOLVED_CONFIG_FILE = "config.json"

type ModelPreset = Literal["desk", "full"]


FULL_GENERATOR = UNetConfig(
    image_size=256, depth=8, base_channels=64, kernel=8
)

FULL_DISCRIMINATOR = PatchDiscConfig(layers=3, base_channels=64, kernel=8)

FULL_VOCODER = VocoderConfig(
    layers_per_cycle=10,
    cycles=3,
    residual_channels=64,
    skip_channels=128,
)

FULL_VOCODER_SEGMENT = 30080
"""
Training excerpt of the `full` vocoder preset: 1.88 s at 16 kHz.
"""


@dataclass(frozen=True)
class SeedsConfig:
    """
    Attributes:
        data: Seeds score drawing and rendering.
        split: Seeds the train/held-out split.
        translator: Seeds translator initialisation and shuffling.
        vocoder: Seeds vocoder initialisation and excerpts.
        generation: Seeds sampled vocoder generation.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    data: int = 0
    split: int = 0
    translator: int = 0
    vocoder: int = 0
    generation: int = 0


@dataclass(frozen=True)
class PathsConfig:
    """
    Default locations of artifacts, used when a command does not receive
    them explicitly.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    dataset: str | None = None
    translator: str | None = None
    vocoder: str | None = None
    restorers: tuple[str, ...] = ()


@dataclass(frozen=True)
class RunConfig:
    """
    The configuration of a run, as read from a JSON or YAML document.
    All sections are optional.

    Attributes:
        audio: Sample rate, chunk duration and mel range.
        stft: STFT preset name or explicit parameters.
        image: Image size and dB range.
        task: Translation task (overrides `dataset.task`).
        dataset: Dataset generation settings.
        generator: Generator preset name or architecture.
        discriminator: Discriminator architecture (by default, matching
            the generator preset with the right input channels).
        train: Translator training settings.
        vocoder: Vocoder preset name or architecture.
        vocoder_train: Vocoder training settings.
        seeds: Seeds of the random stages.
        paths: Default artifact locations.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    audio: AudioConfig = AudioConfig()
    stft: StftPreset | StftParams = "desk"
    image: ImageConfig = ImageConfig()
    task: Task | None = None
    dataset: DatasetConfig = DatasetConfig()
    generator: ModelPreset | UNetConfig = "desk"
    discriminator: PatchDiscConfig | None = None
    train: TrainConfig = TrainConfig()
    vocoder: ModelPreset | VocoderConfig = "desk"
    vocoder_train: VocoderTrainConfig = VocoderTrainConfig()
    seeds: SeedsConfig = SeedsConfig()
    paths: PathsConfig = PathsConfig()

    @property
    def resolved_task(self) -> Task:
        return self.task or self.dataset.task

    def frontend(self) -> Frontend:
        return Frontend(self.audio, self.image, self.stft)

    def with_seed(self, seed: int) -> "RunConfig":
        """
        Use the same seed for all random stages.
        """
        seeds = SeedsConfig(seed, seed, seed, seed, seed)
        return replace(self, seeds=seeds)


def load_run_config(path: Path | None, seed: int | None = None) -> RunConfig:
    """
    Load a run configuration (the defaults if `path` is `None`).

    Raises:
        ValidationError: unknown keys or ill-typed values.
        ConfigError: invalid values.
        OSError: the file cannot be read.
    """
    data = read_document(path) if path is not None else {}
    config = load_typed(RunConfig, data)
    if seed is not None:
        config = config.with_seed(seed)
    return config


#####
##### Resolving presets
#####


def input_channels(task: Task) -> int:
    return JOINT_CHANNELS if task == "joint" else 1


def generator_config(config: RunConfig) -> UNetConfig:
    """
    The generator architecture, with channels matching the task and
    image size matching the front end.

    Raises:
        ConfigError: an explicit architecture or the `full` preset
            disagrees with the image size.
    """
    size = config.image.size
    channels = input_channels(config.resolved_task)
    match config.generator:
        case "desk":
            depth = min(4, size.bit_length() - 1)
            g = UNetConfig(image_size=size, depth=depth, in_channels=channels)
        case "full":
            g = replace(FULL_GENERATOR, in_channels=channels)
        case UNetConfig():
            g = config.generator
    if g.image_size != size:
        raise ConfigError(
            "image_size_mismatch",
            f"Generator expects {g.image_size}x{g.image_size} images, "
            + f"the front end produces {size}x{size}.",
        )
    return g


def discriminator_config(config: RunConfig) -> PatchDiscConfig:
    g = generator_config(config)
    if config.discriminator is not None:
        return config.discriminator
    full = config.generator == "full"
    d = FULL_DISCRIMINATOR if full else PatchDiscConfig()
    return replace(d, in_channels=g.in_channels + g.out_channels)


def translator_train_config(config: RunConfig) -> TrainConfig:
    return replace(config.train, seed=config.seeds.translator)


def vocoder_config(config: RunConfig, frontend: Frontend) -> VocoderConfig:
    """
    The vocoder architecture, conditioned on the front end's mel bins at
    its hop.
    """
    match config.vocoder:
        case "desk":
            v = VocoderConfig()
        case "full":
            v = FULL_VOCODER
        case VocoderConfig():
            v = config.vocoder
    return replace(v, cond_channels=frontend.size, hop=frontend.params.hop)


def vocoder_train_config(config: RunConfig) -> VocoderTrainConfig:
    t = replace(config.vocoder_train, seed=config.seeds.vocoder)
    if config.vocoder == "full":
        t = replace(t, segment_samples=FULL_VOCODER_SEGMENT)
    return t


@dataclass(frozen=True)
class ResolvedConfig:
    """
    A run configuration with all presets expanded, as written next to
    the outputs of every command.
    """

    task: Task
    audio: AudioConfig
    image: ImageConfig
    stft: StftParams
    dataset: DatasetConfig
    generator: UNetConfig
    discriminator: PatchDiscConfig
    train: TrainConfig
    vocoder: VocoderConfig
    vocoder_train: VocoderTrainConfig
    seeds: SeedsConfig
    paths: PathsConfig


def resolve_config(config: RunConfig) -> ResolvedConfig:
    fe = config.frontend()
    task = config.resolved_task
    return ResolvedConfig(
        task=task,
        audio=config.audio,
        image=config.image,
        stft=fe.params,
        dataset=replace(config.dataset, task=task),
        generator=generator_config(config),
        discriminator=discriminator_config(config),
        train=translator_train_config(config),
        vocoder=vocoder_config(config, fe),
        vocoder_train=vocoder_train_config(config),
        seeds=config.seeds,
        paths=config.paths,
    )


def write_resolved_config(config: RunConfig, out_dir: Path) -> Path:
    path = out_dir / RESOLVED_CONFIG_FILE
    write_json(path, dump_typed(ResolvedConfig, resolve_config(config)))
    return path
