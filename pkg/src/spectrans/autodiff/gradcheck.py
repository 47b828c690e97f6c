"""
Numerical verification of gradients by central finite differences.
"""

from collections.abc import Callable, Sequence

import numpy as np

from spectrans.autodiff.tensor import Tensor, no_grad


def _scalarize(out: Tensor, seed: int) -> Tensor:
    if out.values.size == 1:
        return out.sum()
    rng = np.random.default_rng(seed)
    return (out * rng.standard_normal(out.shape)).sum()


def check_gradients(
    fn: Callable[[Sequence[Tensor]], Tensor],
    inputs: Sequence[np.ndarray],
    eps: float = 1e-4,
    seed: int = 0,
) -> float:
    """
    Compare the analytic gradients of `fn` with central differences.

    Non-scalar outputs are reduced to a scalar through a fixed random
    projection.

    Returns:
        The largest relative error over all inputs, where the error of
        one input is the maximum absolute difference divided by the
        largest gradient magnitude (at least 1e-8).
    """
    arrays = [np.array(x, dtype=np.float64) for x in inputs]
    tensors = [Tensor(x, requires_grad=True) for x in arrays]
    _scalarize(fn(tensors), seed).backward()
    worst = 0.0
    for k, x in enumerate(arrays):
        analytic = tensors[k].grad
        if analytic is None:
            analytic = np.zeros_like(x)
        numeric = np.zeros_like(x)
        for idx in np.ndindex(*x.shape):
            saved = x[idx]
            values: list[float] = []
            for delta in (eps, -eps):
                x[idx] = saved + delta
                with no_grad():
                    out = fn([Tensor(a) for a in arrays])
                    values.append(_scalarize(out, seed).item())
            x[idx] = saved
            numeric[idx] = (values[0] - values[1]) / (2 * eps)
        scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
        worst = max(worst, float(np.abs(analytic - numeric).max() / scale))
    return worst
