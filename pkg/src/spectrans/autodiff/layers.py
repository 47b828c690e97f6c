"""
Parameterised layers and the `Module` base class.

Parameters are discovered by walking module attributes in definition
order, which gives every parameter a stable dotted name (e.g.
`encoders.2.weight`). These names key optimiser state and parameter
files.
"""

import copy
from collections.abc import Iterator, Mapping
from typing import Any

import numpy as np

from spectrans.autodiff import functional as F
from spectrans.autodiff.tensor import Tensor
from spectrans.core.errors import FormatError
from spectrans.utils.misc import derived_seed


class Initializer:
    """
    Draws layer parameters uniformly in `±1/sqrt(fan_in)`, using a seed
    derived from a base seed and the index of the parameter, so that a
    model's initial state only depends on its architecture and seed.

    Values are rounded to float32, so that saving and reloading initial
    parameters is exact.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self.count = 0

    def uniform(self, shape: tuple[int, ...], fan_in: int) -> Tensor:
        rng = np.random.default_rng(derived_seed(self.seed, self.count))
        self.count += 1
        bound = 1.0 / np.sqrt(fan_in)
        values = rng.uniform(-bound, bound, shape).astype(np.float32)
        return Tensor(values.astype(np.float64), requires_grad=True)


class Module:
    """
    Base class for models. Subclasses define `forward`.
    """

    training: bool = True

    def forward(self, *args: Any) -> Tensor:
        raise NotImplementedError()

    def __call__(self, *args: Any) -> Tensor:
        return self.forward(*args)

    def named_parameters(
        self, prefix: str = ""
    ) -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, list):
                for i, m in enumerate(value):  # type: ignore
                    if isinstance(m, Module):
                        yield from m.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())

    def parameter_count(self) -> int:
        return sum(p.values.size for p in self.parameters().values())

    def submodules(self) -> Iterator["Module"]:
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.submodules()
            elif isinstance(value, list):
                for m in value:  # type: ignore
                    if isinstance(m, Module):
                        yield from m.submodules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.submodules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.grad = None

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.values.copy() for k, p in self.named_parameters()}

    def load_state(self, state: Mapping[str, np.ndarray]) -> None:
        """
        Overwrite all parameters.

        Raises:
            FormatError: names or shapes do not match the architecture.
        """
        params = self.parameters()
        if set(state) != set(params):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise FormatError(
                "parameter_mismatch",
                "Parameters do not match the architecture.",
                meta={"missing": missing, "unexpected": extra},
            )
        for name, p in params.items():
            v = np.asarray(state[name], dtype=np.float64)
            if v.shape != p.shape:
                raise FormatError(
                    "parameter_mismatch",
                    f"{name}: expected shape {p.shape}, got {v.shape}.",
                )
        for name, p in params.items():
            p.values = np.array(state[name], dtype=np.float64)
            p.grad = None

    def clone(self) -> "Module":
        return copy.deepcopy(self)


#####
##### Layers
#####


class Conv2d(Module):
    def __init__(
        self,
        init: Initializer,
        in_channels: int,
        out_channels: int,
        kernel: int,
        stride: int = 1,
        pad: int = 0,
    ):
        fan_in = in_channels * kernel * kernel
        shape = (out_channels, in_channels, kernel, kernel)
        self.weight = init.uniform(shape, fan_in)
        self.bias = init.uniform((out_channels,), fan_in)
        self.stride = stride
        self.pad = pad

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.pad)


class ConvTranspose2d(Module):
    def __init__(
        self,
        init: Initializer,
        in_channels: int,
        out_channels: int,
        kernel: int,
        stride: int = 1,
        pad: int = 0,
    ):
        fan_in = in_channels * kernel * kernel
        shape = (in_channels, out_channels, kernel, kernel)
        self.weight = init.uniform(shape, fan_in)
        self.bias = init.uniform((out_channels,), fan_in)
        self.stride = stride
        self.pad = pad

    def forward(self, x: Tensor) -> Tensor:
        return F.conv_transpose2d(
            x, self.weight, self.bias, self.stride, self.pad
        )


class CausalConv1d(Module):
    """
    A dilated causal convolution over sequences. With `kernel == 1`, a
    pointwise projection.
    """

    def __init__(
        self,
        init: Initializer,
        in_channels: int,
        out_channels: int,
        kernel: int = 1,
        dilation: int = 1,
    ):
        fan_in = in_channels * kernel
        shape = (out_channels, in_channels, kernel)
        self.weight = init.uniform(shape, fan_in)
        self.bias = init.uniform((out_channels,), fan_in)
        self.dilation = dilation

    def forward(self, x: Tensor) -> Tensor:
        return F.causal_conv1d(x, self.weight, self.bias, self.dilation)
