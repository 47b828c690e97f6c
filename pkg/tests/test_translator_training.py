"""
Training loops on tiny generators and datasets.
"""

import numpy as np
import pytest
from _helpers import small_dataset

from spectrans.autodiff import Tensor
from spectrans.core.errors import (
    ConfigError,
    ContractError,
    DegenerateInputError,
)
from spectrans.core.traces import Tracer
from spectrans.translator import (
    Generator,
    History,
    PatchDiscConfig,
    TrainConfig,
    UNetConfig,
    build_discriminator,
    build_generator,
    lsgan_d_loss,
    lsgan_g_loss,
    make_optimizers,
    train,
    train_autoencoder_baseline,
    train_step,
)
from spectrans.translator.training import batches, check_dataset

SMALL_G = UNetConfig(image_size=16, depth=2, base_channels=4)
SMALL_D = PatchDiscConfig(layers=2, base_channels=4)
FAST = TrainConfig(steps=30, lr_g=2e-3, lr_d=2e-3, batch_size=2)


def _head_tail(values: list[float], n: int = 5) -> tuple[float, float]:
    return float(np.mean(values[:n])), float(np.mean(values[-n:]))


def test_lsgan_losses():
    ones = Tensor(np.ones((2, 1, 2, 2)))
    zeros = Tensor(np.zeros((2, 1, 2, 2)))
    assert lsgan_d_loss(ones, zeros).item() == 0.0
    assert lsgan_d_loss(zeros, ones).item() == pytest.approx(1.0)
    assert lsgan_g_loss(zeros).item() == pytest.approx(0.5)
    assert lsgan_g_loss(ones).item() == 0.0


def test_batches_cover_every_epoch():
    d = small_dataset("pitch_track")
    cfg = TrainConfig(steps=6, batch_size=3)
    shapes = [x.shape[0] for x, _ in batches(d, cfg)]
    assert shapes == [3, 1, 3, 1, 3, 1]
    a = [x for x, _ in batches(d, cfg)]
    b = [x for x, _ in batches(d, cfg)]
    assert all(np.array_equal(u, v) for u, v in zip(a, b))


def test_train_step_updates_both_networks():
    d = small_dataset("pitch_track")
    G, D = build_generator(SMALL_G, 0), build_discriminator(SMALL_D, 1)
    g0, d0 = G.state(), D.state()
    batch = next(iter(batches(d, FAST)))
    losses = train_step(G, D, batch, FAST, make_optimizers(FAST))
    assert losses.loss_d >= 0 and losses.loss_adv >= 0
    assert 0 <= losses.loss_l1 <= 2
    assert any(not np.array_equal(v, G.state()[k]) for k, v in g0.items())
    assert any(not np.array_equal(v, D.state()[k]) for k, v in d0.items())
    assert all(p.grad is None for p in G.parameters().values())
    assert all(p.grad is None for p in D.parameters().values())


def test_train_step_checks_batch():
    G, D = build_generator(SMALL_G, 0), build_discriminator(SMALL_D, 1)
    batch = (np.zeros((1, 1, 16, 16)), np.zeros((2, 1, 16, 16)))
    with pytest.raises(ContractError):
        train_step(G, D, batch, FAST, make_optimizers(FAST))


def test_dataset_checks():
    d = small_dataset("pitch_track", n_scores=1)
    with pytest.raises(DegenerateInputError):
        check_dataset(d.with_pairs([]), SMALL_G, SMALL_D)
    with pytest.raises(ConfigError):
        check_dataset(d, UNetConfig(16, 2, 4, in_channels=3), None)
    with pytest.raises(ConfigError):
        check_dataset(d, UNetConfig(32, 2, 4), None)
    with pytest.raises(ConfigError):
        check_dataset(d, SMALL_G, PatchDiscConfig(2, 4, in_channels=4))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"lambda_l1": -1.0},
        {"steps": 0},
        {"batch_size": 0},
        {"dropout_p": 1.0},
        {"checkpoint_every": -1},
    ],
)
def test_invalid_train_config(kwargs: dict[str, float]):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)  # type: ignore


#####
##### Full loops
#####


@pytest.mark.slow
def test_adversarial_training_reduces_l1():
    d = small_dataset("pitch_track")
    tracer = Tracer("info")
    statuses: list[str] = []
    result = train(
        d, SMALL_G, SMALL_D, FAST, tracer=tracer, on_status=statuses.append
    )
    h = result.history
    assert set(h) == {"step", "loss_d", "loss_adv", "loss_l1"}
    assert h["step"] == [float(i) for i in range(1, 31)]
    head, tail = _head_tail(h["loss_l1"])
    assert tail < head
    assert len(statuses) == 30 and statuses[-1].startswith("step 30/30")
    assert result.discriminator is not None
    assert not result.generator.training
    messages = [m.message for m in tracer.messages]
    assert messages == ["training_started", "training_done"]


@pytest.mark.slow
def test_training_is_reproducible():
    d = small_dataset("pitch_track")
    cfg = TrainConfig(steps=5, lr_g=2e-3, lr_d=2e-3, dropout_p=0.5)
    a = train(d, SMALL_G, SMALL_D, cfg)
    b = train(d, SMALL_G, SMALL_D, cfg)
    assert a.history == b.history
    for name, value in a.generator.state().items():
        assert np.array_equal(value, b.generator.state()[name])


@pytest.mark.slow
def test_baseline_training():
    d = small_dataset("pitch_track")
    result = train_autoencoder_baseline(d, SMALL_G, FAST)
    assert result.discriminator is None
    assert set(result.history) == {"step", "loss_l1"}
    head, tail = _head_tail(result.history["loss_l1"])
    assert tail < head


@pytest.mark.slow
def test_intermediate_checkpoints():
    d = small_dataset("pitch_track", n_scores=1)
    cfg = TrainConfig(steps=6, checkpoint_every=2)
    seen: list[tuple[int, int]] = []

    def on_checkpoint(step: int, G: Generator, history: History) -> None:
        seen.append((step, len(history["step"])))

    tracer = Tracer("info")
    train_autoencoder_baseline(
        d, SMALL_G, cfg, tracer=tracer, on_checkpoint=on_checkpoint
    )
    assert seen == [(2, 2), (4, 4), (6, 6)]
    written = [m for m in tracer.messages if m.message == "checkpoint_written"]
    assert len(written) == 3
