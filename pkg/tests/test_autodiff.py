"""
Gradient checks and behavioural tests for the differentiation engine.
"""

from collections.abc import Callable, Sequence

import numpy as np
import pytest

import spectrans.autodiff.functional as F
from spectrans.autodiff import Tensor, check_gradients, no_grad, parameter
from spectrans.core.errors import ContractError

GRAD_TOLERANCE = 1e-3

type Fn = Callable[[Sequence[Tensor]], Tensor]


def _away_from_zero(shape: tuple[int, ...], seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    sign = rng.choice([-1.0, 1.0], shape)
    return sign * rng.uniform(0.1, 1.0, shape)


def _normal(shape: tuple[int, ...], seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(shape)


#####
##### Gradient checks
#####


CONV_CASES: list[tuple[str, Fn, list[tuple[int, ...]]]] = [
    (
        "conv2d_same",
        lambda t: F.conv2d(t[0], t[1], t[2], 1, 1),
        [(2, 2, 5, 5), (3, 2, 3, 3), (3,)],
    ),
    (
        "conv2d_strided",
        lambda t: F.conv2d(t[0], t[1], t[2], 2, 1),
        [(1, 2, 6, 6), (3, 2, 4, 4), (3,)],
    ),
    (
        "conv_transpose2d",
        lambda t: F.conv_transpose2d(t[0], t[1], t[2], 2, 1),
        [(1, 3, 3, 3), (3, 2, 4, 4), (2,)],
    ),
    (
        "causal_conv1d",
        lambda t: F.causal_conv1d(t[0], t[1], t[2], 2),
        [(2, 3, 9), (4, 3, 2), (4,)],
    ),
    (
        "causal_conv1d_wide",
        lambda t: F.causal_conv1d(t[0], t[1], t[2], 4),
        [(1, 2, 12), (2, 2, 3), (2,)],
    ),
]


@pytest.mark.parametrize(
    "fn,shapes", [c[1:] for c in CONV_CASES], ids=[c[0] for c in CONV_CASES]
)
def test_convolution_gradients(fn: Fn, shapes: list[tuple[int, ...]]):
    inputs = [_normal(s, seed=i) for i, s in enumerate(shapes)]
    assert check_gradients(fn, inputs) < GRAD_TOLERANCE


ELEMENTWISE: list[tuple[str, Fn]] = [
    ("leaky_relu", lambda t: F.leaky_relu(t[0])),
    ("relu", lambda t: F.relu(t[0])),
    ("tanh", lambda t: F.tanh(t[0])),
    ("sigmoid", lambda t: F.sigmoid(t[0])),
    ("instance_norm", lambda t: F.instance_norm2d(t[0])),
    ("abs", lambda t: t[0].abs()),
    ("exp", lambda t: t[0].exp()),
    ("log", lambda t: (t[0] ** 2 + 1).log()),
    ("pow_div", lambda t: (t[0] ** 3) / (t[0] ** 2 + 2)),
    ("mean_axis", lambda t: t[0].mean(axis=(2, 3))),
    ("slice", lambda t: t[0][:, 1:, ::2] * 2.0),
    ("reshape", lambda t: t[0].reshape(t[0].shape[0], -1).sum(axis=1)),
]


@pytest.mark.parametrize(
    "fn", [c[1] for c in ELEMENTWISE], ids=[c[0] for c in ELEMENTWISE]
)
@pytest.mark.parametrize("shape", [(1, 1, 3, 3), (2, 3, 4, 4), (1, 2, 2, 5)])
def test_elementwise_gradients(fn: Fn, shape: tuple[int, ...]):
    x = _away_from_zero(shape, seed=sum(shape))
    assert check_gradients(fn, [x]) < GRAD_TOLERANCE


@pytest.mark.parametrize("shape", [(1, 2, 3), (2, 3, 4), (3, 1, 5)])
def test_binary_gradients(shape: tuple[int, ...]):
    a = _normal(shape, seed=1)
    b = _normal(shape[1:], seed=2)

    def fn(t: Sequence[Tensor]) -> Tensor:
        return F.gated_activation(t[0] * t[1] - t[1], t[0] + 0.5 * t[1])

    assert check_gradients(fn, [a, b]) < GRAD_TOLERANCE


@pytest.mark.parametrize("shape", [(1, 1, 3, 3), (2, 3, 4, 4), (1, 2, 2, 5)])
def test_concat_gradients(shape: tuple[int, ...]):
    a, b = _normal(shape, seed=3), _normal(shape, seed=4)

    def fn(t: Sequence[Tensor]) -> Tensor:
        return F.concat([t[0], F.tanh(t[1]), t[0] * t[1]], axis=1)

    assert check_gradients(fn, [a, b]) < GRAD_TOLERANCE


@pytest.mark.parametrize("shape", [(2, 5), (3, 4, 6), (1, 8, 2)])
def test_loss_gradients(shape: tuple[int, ...]):
    pred = _normal(shape, seed=5)
    target = pred + _away_from_zero(shape, seed=6)
    classes = np.random.default_rng(7).integers(
        0, shape[1], (shape[0], *shape[2:])
    )
    losses: list[Fn] = [
        lambda t: F.l1_loss(t[0], target),
        lambda t: F.mse_loss(t[0], target),
        lambda t: F.softmax_cross_entropy(t[0], classes),
    ]
    for fn in losses:
        assert check_gradients(fn, [pred]) < GRAD_TOLERANCE


#####
##### Forward semantics
#####


def test_conv2d_matches_direct_sum():
    x, w = _normal((1, 2, 4, 4), 0), _normal((3, 2, 3, 3), 1)
    b = _normal((3,), 2)
    out = F.conv2d(Tensor(x), Tensor(w), Tensor(b), 1, 0).values
    for o in range(3):
        for i in range(2):
            for j in range(2):
                patch = x[0, :, i : i + 3, j : j + 3]
                expected = np.sum(patch * w[o]) + b[o]
                assert out[0, o, i, j] == pytest.approx(expected)


def test_conv_transpose_is_adjoint():
    x, w = _normal((1, 2, 8, 8), 3), _normal((3, 2, 4, 4), 4)
    y = _normal((1, 3, 4, 4), 5)
    fwd = F.conv2d(Tensor(x), Tensor(w), None, 2, 1).values
    adj = F.conv_transpose2d(Tensor(y), Tensor(w), None, 2, 1).values
    assert adj.shape == x.shape
    assert np.sum(fwd * y) == pytest.approx(np.sum(x * adj))


def test_causal_conv_ignores_future():
    x, w = _normal((1, 2, 16), 6), _normal((2, 2, 3), 7)
    base = F.causal_conv1d(Tensor(x), Tensor(w), None, 4).values
    x2 = x.copy()
    x2[0, :, 10] += 1.0
    changed = F.causal_conv1d(Tensor(x2), Tensor(w), None, 4).values
    assert np.array_equal(base[..., :10], changed[..., :10])
    assert not np.array_equal(base[..., 10], changed[..., 10])


def test_instance_norm_statistics():
    y = F.instance_norm2d(Tensor(_normal((2, 3, 5, 5), 8) * 4 + 1)).values
    assert np.allclose(y.mean(axis=(2, 3)), 0.0, atol=1e-9)
    assert np.allclose(y.std(axis=(2, 3)), 1.0, atol=1e-3)


def test_softmax_cross_entropy_uniform():
    loss = F.softmax_cross_entropy(Tensor(np.zeros((4, 8))), np.arange(4))
    assert loss.item() == pytest.approx(np.log(8))
    with pytest.raises(ContractError):
        F.softmax_cross_entropy(Tensor(np.zeros((4, 8))), np.full(4, 8))


def test_dropout():
    x = Tensor(np.ones((100, 100)))
    assert F.dropout(x, 0.5, None) is x
    y = F.dropout(x, 0.5, np.random.default_rng(0)).values
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert 0.4 < np.mean(y == 0) < 0.6


#####
##### Graph handling
#####


def test_gradients_accumulate_over_uses():
    x = parameter([1.0, -2.0, 3.0])
    ((x * x).sum() + x.sum()).backward()
    assert x.grad is not None
    assert np.allclose(x.grad, 2 * x.values + 1)


def test_backward_needs_scalar():
    x = parameter(np.ones(3))
    with pytest.raises(ContractError):
        (x * 2).backward()


def test_no_grad():
    x = parameter(np.ones(3))
    with no_grad():
        y = x * 2
    assert not y.requires_grad and y.is_leaf
    assert (x * 2).requires_grad


def test_shape_mismatch():
    with pytest.raises(ContractError):
        F.l1_loss(Tensor(np.zeros(3)), np.zeros(4))
    with pytest.raises(ContractError):
        x, w = np.zeros((1, 2, 4, 4)), np.zeros((1, 3, 3, 3))
        F.conv2d(Tensor(x), Tensor(w), None)
