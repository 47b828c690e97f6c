"""
Differentiable operations on `Tensor`: convolutions, normalisation,
activations and losses.

Image tensors are laid out as `(batch, channels, height, width)` and
sequence tensors as `(batch, channels, time)`.
"""

from collections.abc import Sequence

import numpy as np

from spectrans.autodiff.tensor import Tensor, TensorLike, as_tensor, record
from spectrans.core.errors import ContractError


def _check_rank(x: Tensor, rank: int, what: str) -> None:
    if x.ndim != rank:
        raise ContractError(
            "invalid_rank", f"{what}: expected rank {rank}, got {x.shape}."
        )


#####
##### Convolutions
#####


def conv2d(
    x: Tensor, w: Tensor, b: Tensor | None, stride: int = 1, pad: int = 0
) -> Tensor:
    """
    Two-dimensional cross-correlation with zero padding.

    Arguments:
        x: Input of shape `(N, C, H, W)`.
        w: Kernel of shape `(O, C, K, K)`.
        b: Bias of shape `(O,)`.
    """
    _check_rank(x, 4, "conv2d input")
    n, c, h, wd = x.shape
    o, ci, k, _ = w.shape
    if ci != c:
        raise ContractError(
            "channel_mismatch", f"conv2d: kernel expects {ci}, got {c}."
        )
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    if ho < 1 or wo < 1:
        raise ContractError("input_too_small", f"conv2d: {x.shape}")
    xp = np.pad(x.values, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    hs, ws = stride * ho, stride * wo

    out = np.zeros((n, o, ho, wo))
    for i in range(k):
        for j in range(k):
            patch = xp[:, :, i : i + hs : stride, j : j + ws : stride]
            out += np.einsum("nchw,oc->nohw", patch, w.values[:, :, i, j])

    def grad_fn(g: np.ndarray):
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(w.values)
        for i in range(k):
            for j in range(k):
                sl = (
                    slice(None),
                    slice(None),
                    slice(i, i + hs, stride),
                    slice(j, j + ws, stride),
                )
                gxp[sl] += np.einsum("nohw,oc->nchw", g, w.values[:, :, i, j])
                gw[:, :, i, j] = np.einsum("nchw,nohw->oc", xp[sl], g)
        gx = gxp[:, :, pad : pad + h, pad : pad + wd]
        return (gx, gw, g.sum(axis=(0, 2, 3)))

    if b is None:
        return record(out, (x, w), lambda g: grad_fn(g)[:2])
    out += b.values[None, :, None, None]
    return record(out, (x, w, b), grad_fn)


def conv_transpose2d(
    x: Tensor, w: Tensor, b: Tensor | None, stride: int = 1, pad: int = 0
) -> Tensor:
    """
    Transposed convolution, the adjoint of `conv2d`. The output has size
    `(H - 1) * stride - 2 * pad + K` along each spatial axis.

    Arguments:
        x: Input of shape `(N, C, H, W)`.
        w: Kernel of shape `(C, O, K, K)`.
        b: Bias of shape `(O,)`.
    """
    _check_rank(x, 4, "conv_transpose2d input")
    n, c, h, wd = x.shape
    ci, o, k, _ = w.shape
    if ci != c:
        raise ContractError(
            "channel_mismatch",
            f"conv_transpose2d: kernel expects {ci}, got {c}.",
        )
    hf, wf = (h - 1) * stride + k, (wd - 1) * stride + k
    ho, wo = hf - 2 * pad, wf - 2 * pad
    if ho < 1 or wo < 1:
        raise ContractError("input_too_small", f"conv_transpose2d: {x.shape}")
    hs, ws = stride * h, stride * wd

    full = np.zeros((n, o, hf, wf))
    for i in range(k):
        for j in range(k):
            full[:, :, i : i + hs : stride, j : j + ws : stride] += np.einsum(
                "nchw,co->nohw", x.values, w.values[:, :, i, j]
            )
    out = full[:, :, pad : pad + ho, pad : pad + wo]

    def grad_fn(g: np.ndarray):
        gfull = np.zeros((n, o, hf, wf))
        gfull[:, :, pad : pad + ho, pad : pad + wo] = g
        gx = np.zeros_like(x.values)
        gw = np.zeros_like(w.values)
        for i in range(k):
            for j in range(k):
                gs = gfull[:, :, i : i + hs : stride, j : j + ws : stride]
                gx += np.einsum("nohw,co->nchw", gs, w.values[:, :, i, j])
                gw[:, :, i, j] = np.einsum("nchw,nohw->co", x.values, gs)
        return (gx, gw, g.sum(axis=(0, 2, 3)))

    if b is None:
        return record(out, (x, w), lambda g: grad_fn(g)[:2])
    out = out + b.values[None, :, None, None]
    return record(out, (x, w, b), grad_fn)


def causal_conv1d(
    x: Tensor, w: Tensor, b: Tensor | None, dilation: int = 1
) -> Tensor:
    """
    Dilated causal convolution: the output at time `t` only depends on
    inputs at times `t - d * j` for `j` in `[0, K)`. The input is
    left-padded with `d * (K - 1)` zeros so that lengths are preserved.

    Arguments:
        x: Input of shape `(N, C, T)`.
        w: Kernel of shape `(O, C, K)`, where `w[..., K - 1]` weighs the
            current time step.
        b: Bias of shape `(O,)`.
    """
    _check_rank(x, 3, "causal_conv1d input")
    _, c, t = x.shape
    _, ci, k = w.shape
    if ci != c:
        raise ContractError(
            "channel_mismatch", f"causal_conv1d: kernel expects {ci}, got {c}."
        )
    lpad = dilation * (k - 1)
    xp = np.pad(x.values, ((0, 0), (0, 0), (lpad, 0)))
    out = np.zeros((x.shape[0], w.shape[0], t))
    for j in range(k):
        s = j * dilation
        out += np.einsum("nct,oc->not", xp[:, :, s : s + t], w.values[:, :, j])

    def grad_fn(g: np.ndarray):
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(w.values)
        for j in range(k):
            s = j * dilation
            wj = w.values[:, :, j]
            gxp[:, :, s : s + t] += np.einsum("not,oc->nct", g, wj)
            gw[:, :, j] = np.einsum("nct,not->oc", xp[:, :, s : s + t], g)
        return (gxp[:, :, lpad:], gw, g.sum(axis=(0, 2)))

    if b is None:
        return record(out, (x, w), lambda g: grad_fn(g)[:2])
    out += b.values[None, :, None]
    return record(out, (x, w, b), grad_fn)


#####
##### Normalisation and activations
#####


def instance_norm2d(x: Tensor, eps: float = 1e-5) -> Tensor:
    """
    Normalise each channel of each example to zero mean and unit
    variance over its spatial positions.
    """
    _check_rank(x, 4, "instance_norm2d input")
    mu = x.values.mean(axis=(2, 3), keepdims=True)
    var = x.values.var(axis=(2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.values - mu) * inv

    def grad_fn(g: np.ndarray):
        gm = g.mean(axis=(2, 3), keepdims=True)
        gxm = (g * xhat).mean(axis=(2, 3), keepdims=True)
        return (inv * (g - gm - xhat * gxm),)

    return record(xhat, (x,), grad_fn)


def relu(x: Tensor) -> Tensor:
    mask = x.values > 0
    return record(x.values * mask, (x,), lambda g: (g * mask,))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    scale = np.where(x.values > 0, 1.0, slope)
    return record(x.values * scale, (x,), lambda g: (g * scale,))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.values)
    return record(out, (x,), lambda g: (g * (1 - out**2),))


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1 + np.tanh(0.5 * x.values))
    return record(out, (x,), lambda g: (g * out * (1 - out),))


def gated_activation(filt: Tensor, gate: Tensor) -> Tensor:
    return tanh(filt) * sigmoid(gate)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not tensors:
        raise ContractError("empty_concat", "Nothing to concatenate.")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.values for t in tensors], axis=axis)
    return record(
        out,
        tuple(tensors),
        lambda g: tuple(np.split(g, bounds, axis=axis)),
    )


def dropout(x: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    """
    Zero each entry with probability `p` and rescale the others by
    `1 / (1 - p)`. The identity when `p == 0` or `rng` is `None`.
    """
    if p <= 0 or rng is None:
        return x
    if p >= 1:
        raise ContractError("invalid_dropout", f"p = {p}")
    mask = (rng.random(x.shape) >= p) / (1 - p)
    return record(x.values * mask, (x,), lambda g: (g * mask,))


#####
##### Losses
#####


def l1_loss(pred: Tensor, target: TensorLike) -> Tensor:
    """
    Mean absolute error. The gradient at zero error is zero.
    """
    t = as_tensor(target)
    _check_same_shape(pred, t)
    return (pred - t).abs().mean()


def mse_loss(pred: Tensor, target: TensorLike) -> Tensor:
    t = as_tensor(target)
    if t.ndim:
        _check_same_shape(pred, t)
    return ((pred - t) ** 2).mean()


def softmax_cross_entropy(logits: Tensor, classes: np.ndarray) -> Tensor:
    """
    Mean negative log-likelihood of integer `classes` under the softmax
    of `logits` along axis 1.

    Arguments:
        logits: Shape `(N, K)` or `(N, K, T)`.
        classes: Integers in `[0, K)` of shape `(N,)` or `(N, T)`.
    """
    classes = np.asarray(classes)
    n_classes = logits.shape[1]
    expected = (logits.shape[0], *logits.shape[2:])
    if classes.shape != expected:
        raise ContractError(
            "shape_mismatch",
            f"Classes {classes.shape} do not match logits {logits.shape}.",
        )
    if classes.size and (classes.min() < 0 or classes.max() >= n_classes):
        raise ContractError(
            "class_out_of_range", f"Classes must lie in [0, {n_classes})."
        )
    z = logits.values - logits.values.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    picked = np.take_along_axis(logp, classes[:, None], axis=1)
    count = max(classes.size, 1)
    loss = -picked.sum() / count

    def grad_fn(g: np.ndarray):
        p = np.exp(logp)
        np.put_along_axis(
            p,
            classes[:, None],
            np.take_along_axis(p, classes[:, None], axis=1) - 1,
            axis=1,
        )
        return (g * p / count,)

    return record(np.asarray(loss), (logits,), grad_fn)


def _check_same_shape(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ContractError(
            "shape_mismatch", f"Shapes differ: {a.shape} vs {b.shape}."
        )
