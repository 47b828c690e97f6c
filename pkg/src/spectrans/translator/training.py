"""
Adversarial training of translators, and the autoencoder baseline trained
without a discriminator.
"""

import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field

import numpy as np
from pydantic import ConfigDict

from spectrans.autodiff import functional as F
from spectrans.autodiff.optim import AdamState, adam_step, zero_grads
from spectrans.autodiff.tensor import Tensor
from spectrans.core.errors import (
    ConfigError,
    ContractError,
    DegenerateInputError,
    NumericError,
)
from spectrans.core.traces import Tracer, log_to
from spectrans.datagen.datasets import PairedDataset
from spectrans.translator.models import (
    Discriminator,
    Generator,
    PatchDiscConfig,
    UNetConfig,
    build_discriminator,
    build_generator,
    discriminator_seed,
)
from spectrans.utils.misc import derived_seed


@dataclass(frozen=True)
class TrainConfig:
    """
    Attributes:
        lambda_l1: Weight of the L1 term in the generator objective.
        lr_g: Adam learning rate of the generator.
        lr_d: Adam learning rate of the discriminator.
        beta1: First Adam decay rate (both networks).
        beta2: Second Adam decay rate (both networks).
        batch_size: Number of pairs per step.
        steps: Total number of optimisation steps.
        seed: Seeds initialisation, shuffling and dropout.
        dropout_p: Dropout probability in the decoder during training.
        checkpoint_every: Interval (in steps) between intermediate
            checkpoints, or 0 for none.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    lambda_l1: float = 100.0
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 1
    steps: int = 1000
    seed: int = 0
    dropout_p: float = 0.0
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.lambda_l1 < 0:
            raise ConfigError("invalid_lambda", str(self.lambda_l1))
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigError("invalid_steps", str(self))
        if not 0 <= self.dropout_p < 1:
            raise ConfigError("invalid_dropout", str(self.dropout_p))
        if self.checkpoint_every < 0:
            raise ConfigError("invalid_checkpoint_every", str(self))


@dataclass(frozen=True)
class StepLosses:
    loss_d: float
    loss_adv: float
    loss_l1: float


type History = dict[str, list[float]]
"""
Per-step loss history, as columns keyed by name (always including
`step`).
"""


@dataclass
class Optimizers:
    g: AdamState
    d: AdamState | None = None


@dataclass
class TrainResult:
    generator: Generator
    discriminator: Discriminator | None
    history: History = field(default_factory=dict[str, list[float]])


type CheckpointFn = Callable[[int, Generator, History], None]


#####
##### Objectives
#####


def lsgan_d_loss(d_real: Tensor, d_fake: Tensor) -> Tensor:
    return 0.5 * (F.mse_loss(d_real, 1.0) + F.mse_loss(d_fake, 0.0))


def lsgan_g_loss(d_fake: Tensor) -> Tensor:
    return 0.5 * F.mse_loss(d_fake, 1.0)


def _check_batch(G: Generator, x: np.ndarray, y: np.ndarray) -> None:
    c = G.config
    s = c.image_size
    if x.ndim != 4 or x.shape[1:] != (c.in_channels, s, s):
        raise ContractError("shape_mismatch", f"Input batch {x.shape}.")
    if y.shape != (x.shape[0], c.out_channels, s, s):
        raise ContractError("shape_mismatch", f"Target batch {y.shape}.")


def _finite(losses: dict[str, float], step: int) -> None:
    bad = {k: v for k, v in losses.items() if not math.isfinite(v)}
    if bad:
        raise NumericError(
            "non_finite_loss", f"At step {step}.", meta=bad
        )


def make_optimizers(cfg: TrainConfig, adversarial: bool = True) -> Optimizers:
    g = AdamState(cfg.lr_g, cfg.beta1, cfg.beta2)
    d = AdamState(cfg.lr_d, cfg.beta1, cfg.beta2) if adversarial else None
    return Optimizers(g, d)


def train_step(
    G: Generator,
    D: Discriminator,
    batch: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    opt: Optimizers,
) -> StepLosses:
    """
    One discriminator update followed by one generator update.

    The discriminator minimises `½[(D(x, y) - 1)² + D(x, G(x))²]` and the
    generator minimises `½(D(x, G(x)) - 1)² + λ·L1(G(x), y)`, both
    averaged over the score map. Gradients flowing into the
    discriminator during the generator update are discarded.
    """
    x, y = batch
    _check_batch(G, x, y)
    assert opt.d is not None
    xt, yt = Tensor(x), Tensor(y)
    fake = G(xt)

    loss_d = lsgan_d_loss(D(xt, yt), D(xt, fake.detach()))
    loss_d.backward()
    adam_step(D.parameters(), opt.d)

    loss_adv = lsgan_g_loss(D(xt, fake))
    loss_l1 = F.l1_loss(fake, yt)
    (loss_adv + cfg.lambda_l1 * loss_l1).backward()
    adam_step(G.parameters(), opt.g)
    zero_grads(D.parameters())
    return StepLosses(loss_d.item(), loss_adv.item(), loss_l1.item())


def baseline_step(
    G: Generator,
    batch: tuple[np.ndarray, np.ndarray],
    opt: Optimizers,
) -> float:
    """
    One generator update on the L1 objective alone.
    """
    x, y = batch
    _check_batch(G, x, y)
    loss = F.l1_loss(G(Tensor(x)), Tensor(y))
    loss.backward()
    adam_step(G.parameters(), opt.g)
    return loss.item()


#####
##### Training loops
#####


def check_dataset(
    dataset: PairedDataset, g_cfg: UNetConfig, d_cfg: PatchDiscConfig | None
) -> None:
    """
    Raises:
        DegenerateInputError: the dataset is empty.
        ConfigError: channel counts or image sizes are inconsistent.
    """
    if len(dataset) == 0:
        raise DegenerateInputError("empty_dataset", "No pairs to train on.")
    desc = dataset.description
    if desc.input_channels != g_cfg.in_channels or g_cfg.out_channels != 1:
        raise ConfigError(
            "channel_mismatch",
            f"Dataset has {desc.input_channels} input channels, generator "
            + f"expects {g_cfg.in_channels} (-> {g_cfg.out_channels}).",
        )
    if desc.height != g_cfg.image_size or desc.width != g_cfg.image_size:
        raise ConfigError(
            "image_size_mismatch",
            f"Dataset images are {desc.height}x{desc.width}, generator "
            + f"expects {g_cfg.image_size}.",
        )
    if d_cfg is not None:
        expected = g_cfg.in_channels + g_cfg.out_channels
        if d_cfg.in_channels != expected:
            raise ConfigError(
                "channel_mismatch",
                f"Discriminator needs {expected} input channels, "
                + f"got {d_cfg.in_channels}.",
            )


def batches(
    dataset: PairedDataset, cfg: TrainConfig
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """
    Yield `cfg.steps` batches, reshuffling the dataset at every epoch
    with a seed derived from the training seed and the epoch number.
    """
    n = len(dataset)
    step, epoch = 0, 0
    while True:
        rng = np.random.default_rng(derived_seed(cfg.seed, epoch))
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            pairs = [dataset.pairs[i] for i in idx]
            x = np.stack([p.input.pixels for p in pairs])
            y = np.stack([p.target.pixels for p in pairs])
            yield x, y
            step += 1
            if step >= cfg.steps:
                return
        epoch += 1


def _status(step: int, total: int, losses: dict[str, float]) -> str:
    parts = " ".join(f"{k}={v:.4f}" for k, v in losses.items())
    return f"step {step}/{total} {parts}"


def _run(
    dataset: PairedDataset,
    g_cfg: UNetConfig,
    d_cfg: PatchDiscConfig | None,
    t_cfg: TrainConfig,
    *,
    tracer: Tracer | None,
    on_status: Callable[[str], None] | None,
    on_checkpoint: CheckpointFn | None,
) -> TrainResult:
    check_dataset(dataset, g_cfg, d_cfg)
    G = build_generator(g_cfg, t_cfg.seed, t_cfg.dropout_p)
    G.rng = np.random.default_rng(derived_seed(t_cfg.seed, 2))
    G.train()
    D = None
    if d_cfg is not None:
        D = build_discriminator(d_cfg, discriminator_seed(t_cfg.seed))
    opt = make_optimizers(t_cfg, adversarial=D is not None)
    history: History = {"step": []}
    log_to(
        tracer,
        "info",
        "training_started",
        {
            "pairs": len(dataset),
            "steps": t_cfg.steps,
            "adversarial": D is not None,
            "generator_params": G.parameter_count(),
        },
    )
    for step, batch in enumerate(batches(dataset, t_cfg), start=1):
        if D is not None:
            r = train_step(G, D, batch, t_cfg, opt)
            losses = {
                "loss_d": r.loss_d,
                "loss_adv": r.loss_adv,
                "loss_l1": r.loss_l1,
            }
        else:
            losses = {"loss_l1": baseline_step(G, batch, opt)}
        _finite(losses, step)
        history["step"].append(float(step))
        for k, v in losses.items():
            history.setdefault(k, []).append(v)
        log_to(tracer, "trace", "train_step", {"step": step, **losses})
        if on_status is not None:
            on_status(_status(step, t_cfg.steps, losses))
        every = t_cfg.checkpoint_every
        if on_checkpoint is not None and every > 0 and step % every == 0:
            on_checkpoint(step, G, history)
            log_to(tracer, "info", "checkpoint_written", {"step": step})
    G.eval()
    final = {k: v[-1] for k, v in history.items() if k != "step"}
    log_to(tracer, "info", "training_done", final)
    return TrainResult(G, D, history)


def train(
    dataset: PairedDataset,
    g_cfg: UNetConfig,
    d_cfg: PatchDiscConfig,
    t_cfg: TrainConfig,
    *,
    tracer: Tracer | None = None,
    on_status: Callable[[str], None] | None = None,
    on_checkpoint: CheckpointFn | None = None,
) -> TrainResult:
    """
    Train a translator on a paired dataset.

    Raises:
        DegenerateInputError: empty dataset.
        ConfigError: inconsistent channel counts or image sizes.
        NumericError: a loss became non-finite.
    """
    return _run(
        dataset,
        g_cfg,
        d_cfg,
        t_cfg,
        tracer=tracer,
        on_status=on_status,
        on_checkpoint=on_checkpoint,
    )


def train_autoencoder_baseline(
    dataset: PairedDataset,
    g_cfg: UNetConfig,
    t_cfg: TrainConfig,
    *,
    tracer: Tracer | None = None,
    on_status: Callable[[str], None] | None = None,
    on_checkpoint: CheckpointFn | None = None,
) -> TrainResult:
    """
    Train the generator alone on the L1 objective. The generator starts
    from the same parameters as with `train` under the same seed.
    """
    return _run(
        dataset,
        g_cfg,
        None,
        t_cfg,
        tracer=tracer,
        on_status=on_status,
        on_checkpoint=on_checkpoint,
    )
