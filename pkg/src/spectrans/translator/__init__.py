"""
Conditional adversarial spectrogram translation.
"""

# ruff: noqa: F401
# pyright: reportUnusedImport=false

from spectrans.translator.checkpoints import (
    TranslatorSidecar,
    load_checkpoint,
    read_sidecar,
    save_checkpoint,
)
from spectrans.translator.inference import (
    refine_linear,
    translate,
    translate_image,
)
from spectrans.translator.models import (
    Discriminator,
    Generator,
    PatchDiscConfig,
    UNetConfig,
    build_discriminator,
    build_generator,
)
from spectrans.translator.training import (
    History,
    StepLosses,
    TrainConfig,
    TrainResult,
    lsgan_d_loss,
    lsgan_g_loss,
    make_optimizers,
    train,
    train_autoencoder_baseline,
    train_step,
)
