"""
Translator checkpoints: a parameter file next to a JSON sidecar holding
the configurations, the loss history and the provenance of the training
data.
"""

from dataclasses import dataclass
from pathlib import Path

from pydantic import ConfigDict

from spectrans.autodiff.params import PARAMS_SUFFIX, load_module, save_module
from spectrans.core.errors import FormatError
from spectrans.datagen.datasets import (
    DatasetDescription,
    JointLayout,
    Task,
)
from spectrans.dsp.frontend import AudioConfig, Frontend, ImageConfig
from spectrans.dsp.stft import StftParams
from spectrans.translator.models import (
    Generator,
    PatchDiscConfig,
    UNetConfig,
    build_generator,
)
from spectrans.translator.training import History, TrainConfig
from spectrans.utils.typing import (
    ValidationError,
    dump_typed,
    load_typed,
    read_document,
    write_json,
)

SIDECAR_SUFFIX = ".json"


@dataclass(frozen=True)
class TranslatorSidecar:
    """
    Attributes:
        task: Task of the training dataset.
        adversarial: Whether a discriminator was used (`False` for the
            autoencoder baseline).
        generator: Generator architecture.
        discriminator: Discriminator architecture, if any.
        train: Training configuration.
        audio: Audio front-end configuration of the training data.
        image: Image configuration of the training data.
        stft: STFT parameters of the training data.
        step: Number of training steps behind the parameters.
        history: Loss history up to `step`.
        train_pair_ids: Identifiers of the pairs trained on.
        joint_layout: Input layout, for joint translators.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    task: Task
    adversarial: bool
    generator: UNetConfig
    discriminator: PatchDiscConfig | None
    train: TrainConfig
    audio: AudioConfig
    image: ImageConfig
    stft: StftParams
    step: int
    history: History
    train_pair_ids: tuple[str, ...] = ()
    joint_layout: JointLayout = "channel_zero"

    def frontend(self) -> Frontend:
        return Frontend(self.audio, self.image, self.stft)

    @staticmethod
    def describe(
        desc: DatasetDescription,
        g_cfg: UNetConfig,
        d_cfg: PatchDiscConfig | None,
        t_cfg: TrainConfig,
        step: int,
        history: History,
        train_pair_ids: tuple[str, ...],
    ) -> "TranslatorSidecar":
        return TranslatorSidecar(
            task=desc.task,
            adversarial=d_cfg is not None,
            generator=g_cfg,
            discriminator=d_cfg,
            train=t_cfg,
            audio=desc.audio,
            image=desc.image,
            stft=desc.stft,
            step=step,
            history={k: list(v) for k, v in history.items()},
            train_pair_ids=train_pair_ids,
            joint_layout=desc.dataset.joint_layout,
        )


def checkpoint_paths(path: Path) -> tuple[Path, Path]:
    """
    Parameter and sidecar paths of a checkpoint, given either of them or
    their common stem.
    """
    if path.suffix in (PARAMS_SUFFIX, SIDECAR_SUFFIX):
        path = path.with_suffix("")
    return (
        path.with_name(path.name + PARAMS_SUFFIX),
        path.with_name(path.name + SIDECAR_SUFFIX),
    )


def save_checkpoint(
    G: Generator, sidecar: TranslatorSidecar, path: Path
) -> Path:
    """
    Returns:
        The path of the sidecar file.
    """
    params, meta = checkpoint_paths(path)
    save_module(G, params)
    write_json(meta, dump_typed(TranslatorSidecar, sidecar))
    return meta


def read_sidecar(path: Path) -> TranslatorSidecar:
    _, meta = checkpoint_paths(path)
    try:
        return load_typed(TranslatorSidecar, read_document(meta))
    except ValidationError as e:
        raise FormatError("invalid_sidecar", f"{meta}: {e}")


def load_checkpoint(path: Path) -> tuple[Generator, TranslatorSidecar]:
    """
    Raises:
        FormatError: the sidecar is malformed or the parameter file does
            not match the architecture it describes.
    """
    params, _ = checkpoint_paths(path)
    sidecar = read_sidecar(path)
    G = build_generator(sidecar.generator)
    load_module(G, params)
    G.eval()
    return G, sidecar
