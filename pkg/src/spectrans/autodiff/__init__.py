"""
A small reverse-mode automatic differentiation library on numpy arrays.
"""

# ruff: noqa: F401
# pyright: reportUnusedImport=false

from spectrans.autodiff import functional
from spectrans.autodiff.gradcheck import check_gradients
from spectrans.autodiff.layers import (
    CausalConv1d,
    Conv2d,
    ConvTranspose2d,
    Initializer,
    Module,
)
from spectrans.autodiff.optim import AdamState, adam_step, zero_grads
from spectrans.autodiff.params import (
    PARAMS_SUFFIX,
    decode_params,
    encode_params,
    load_module,
    load_params,
    save_module,
    save_params,
)
from spectrans.autodiff.tensor import (
    Tensor,
    as_tensor,
    is_grad_enabled,
    no_grad,
    parameter,
)
