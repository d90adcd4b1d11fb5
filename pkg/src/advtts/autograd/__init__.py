from .tensor import (
    AutogradError,
    DimensionError,
    DomainError,
    Function,
    GraphConsumedError,
    NonFiniteError,
    Tensor,
    UnsupportedOpError,
    as_tensor,
    backward,
    grad,
    is_grad_enabled,
    no_grad,
    parameters_checksum,
    set_grad_enabled,
)
from .ops import (
    add,
    broadcast_to,
    clip,
    concat,
    div,
    elementwise,
    exp,
    flip,
    getitem,
    leaky_relu,
    log,
    matmul,
    mean,
    mul,
    neg,
    pow,
    relu,
    reshape,
    sigmoid,
    sqrt,
    square,
    sub,
    sum,
    sum_to,
    tanh,
    transpose,
)
from .conv import conv1d_causal, conv_transpose1d, receptive_field


def grad_of_grad(output: Tensor, wrt: Tensor) -> Tensor:
    """Gradient of ``output`` w.r.t. ``wrt`` that is itself differentiable."""
    return grad(output, wrt, create_graph=True)[0]
