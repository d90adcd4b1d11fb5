"""Dense float64 tensors and a tape-based reverse-mode engine.

Every differentiable operation is a :class:`Function` subclass.  Backward rules
are written in terms of tensor operations, so running them with recording
switched on yields a differentiable gradient (double backward).  Operations
whose backward drops to raw numpy set ``double_differentiable = False`` and
refuse to take part in a recorded backward pass.
"""
from __future__ import annotations

import contextlib
from typing import Iterable, Sequence

import numpy as np


class AutogradError(RuntimeError):
    pass


class DimensionError(AutogradError, ValueError):
    pass


class DomainError(AutogradError, ValueError):
    pass


class NonFiniteError(AutogradError, FloatingPointError):
    pass


class UnsupportedOpError(AutogradError):
    pass


class GraphConsumedError(AutogradError):
    pass


_grad_enabled = True


def is_grad_enabled() -> bool:
    return _grad_enabled


@contextlib.contextmanager
def set_grad_enabled(flag: bool):
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = bool(flag)
    try:
        yield
    finally:
        _grad_enabled = prev


def no_grad():
    return set_grad_enabled(False)


class Function:
    """One recorded operation.

    Subclasses implement ``forward(*arrays, **kwargs) -> ndarray`` and
    ``backward(grad) -> tuple`` returning one gradient (or None) per input.
    ``self.inputs`` holds the input tensors and ``self.needs_input_grad`` says
    which of them want a gradient.
    """

    name = "function"
    double_differentiable = True

    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs
        self.needs_input_grad = tuple(t.requires_grad for t in inputs)
        self.consumed = False

    def forward(self, *arrays: np.ndarray, **kwargs) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: "Tensor") -> tuple:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs, **kwargs) -> "Tensor":
        tensors = tuple(as_tensor(x) for x in inputs)
        fn = cls(*tensors)
        out = np.asarray(fn.forward(*(t.data for t in tensors), **kwargs), dtype=np.float64)
        if not np.isfinite(out).all():
            raise NonFiniteError(f"{cls.name}: forward produced non-finite values")
        requires = _grad_enabled and any(fn.needs_input_grad)
        result = Tensor(out, requires_grad=requires)
        if requires:
            result._ctx = fn
        return result


class Tensor:
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64) if not isinstance(data, np.ndarray) else data
        if arr.dtype != np.float64:
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._ctx: Function | None = None

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._ctx is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise AutogradError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- operator sugar (implementations live in ops) -----------------------
    def __add__(self, other):
        return ops.add(self, other)

    def __radd__(self, other):
        return ops.add(other, self)

    def __sub__(self, other):
        return ops.sub(self, other)

    def __rsub__(self, other):
        return ops.sub(other, self)

    def __mul__(self, other):
        return ops.mul(self, other)

    def __rmul__(self, other):
        return ops.mul(other, self)

    def __truediv__(self, other):
        return ops.div(self, other)

    def __rtruediv__(self, other):
        return ops.div(other, self)

    def __neg__(self):
        return ops.neg(self)

    def __pow__(self, p: float):
        return ops.pow(self, p)

    def __matmul__(self, other):
        return ops.matmul(self, other)

    def __getitem__(self, index):
        return ops.getitem(self, index)

    @property
    def T(self) -> "Tensor":
        return ops.transpose(self)

    def sum(self, axis=None, keepdims=False):
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def sigmoid(self):
        return ops.sigmoid(self)

    def tanh(self):
        return ops.tanh(self)

    def relu(self):
        return ops.relu(self)

    def exp(self):
        return ops.exp(self)

    def log(self):
        return ops.log(self)

    def backward(self, retain_graph: bool = False) -> None:
        backward(self, retain_graph=retain_graph)


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


# -- engine ------------------------------------------------------------------

def _topological_order(root: Tensor) -> list[Tensor]:
    """Post-order over the recorded graph (inputs before consumers)."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        if node._ctx is not None:
            for inp in node._ctx.inputs:
                if inp.requires_grad and id(inp) not in seen:
                    stack.append((inp, False))
    return order


def _relevant(order: list[Tensor], wanted: set[int]) -> set[int]:
    """Ids of tensors that lie on some path to a wanted tensor."""
    keep: set[int] = set()
    for node in order:  # inputs come first, so reachability propagates forward
        if id(node) in wanted:
            keep.add(id(node))
        elif node._ctx is not None and any(id(i) in keep for i in node._ctx.inputs):
            keep.add(id(node))
    return keep


def _run(output: Tensor, seed: Tensor, create_graph: bool, retain_graph: bool,
         wanted: set[int] | None) -> dict[int, tuple[Tensor, Tensor]]:
    order = _topological_order(output)
    keep = _relevant(order, wanted) if wanted is not None else None
    grads: dict[int, Tensor] = {id(output): seed}
    leaves: dict[int, tuple[Tensor, Tensor]] = {}
    with set_grad_enabled(create_graph):
        for node in reversed(order):
            g = grads.get(id(node))
            if g is None:
                continue
            if wanted is not None and id(node) in wanted:
                leaves[id(node)] = (node, g)
            fn = node._ctx
            if fn is None:
                if wanted is None:
                    leaves[id(node)] = (node, g)
                continue
            if keep is not None and id(node) not in keep:
                continue
            if fn.consumed:
                raise GraphConsumedError(
                    f"{fn.name}: graph already consumed by a previous backward; pass retain_graph=True")
            if create_graph and not fn.double_differentiable:
                raise UnsupportedOpError(f"double backward is not implemented for op '{fn.name}'")
            if keep is not None:
                saved = fn.needs_input_grad
                fn.needs_input_grad = tuple(
                    n and id(i) in keep for n, i in zip(saved, fn.inputs))
                in_grads = fn.backward(g)
                fn.needs_input_grad = saved
            else:
                in_grads = fn.backward(g)
            if not retain_graph:
                fn.consumed = True
            for inp, ig in zip(fn.inputs, in_grads):
                if ig is None or not inp.requires_grad:
                    continue
                if keep is not None and id(inp) not in keep:
                    continue
                prev = grads.get(id(inp))
                grads[id(inp)] = ig if prev is None else prev + ig
    return leaves


def backward(loss: Tensor, retain_graph: bool = False) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every leaf needing it."""
    if loss.size != 1:
        raise AutogradError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise AutogradError("backward() on a tensor that does not require grad")
    seed = Tensor(np.ones_like(loss.data))
    leaves = _run(loss, seed, create_graph=False, retain_graph=retain_graph, wanted=None)
    for node, g in leaves.values():
        node.grad = g.data.copy() if node.grad is None else node.grad + g.data


def grad(output: Tensor, inputs: Sequence[Tensor] | Tensor, create_graph: bool = False,
         retain_graph: bool | None = None, allow_unused: bool = False) -> list[Tensor]:
    """Return d(output)/d(input) for each input without touching ``.grad``.

    With ``create_graph=True`` the returned tensors are themselves recorded and
    can be differentiated again.
    """
    if output.size != 1:
        raise AutogradError(f"grad() needs a scalar output, got shape {output.shape}")
    single = isinstance(inputs, Tensor)
    targets: list[Tensor] = [inputs] if single else list(inputs)
    if retain_graph is None:
        retain_graph = create_graph
    seed = Tensor(np.ones_like(output.data))
    found = _run(output, seed, create_graph=create_graph, retain_graph=retain_graph,
                 wanted={id(t) for t in targets})
    result = []
    for t in targets:
        g = found.get(id(t), (None, None))[1]
        if g is None:
            if not allow_unused:
                raise AutogradError("an input is not reachable from the output (allow_unused=False)")
            g = Tensor(np.zeros_like(t.data))
        result.append(g)
    return result


def parameters_checksum(tensors: Iterable[Tensor]) -> str:
    import hashlib

    h = hashlib.sha256()
    for t in tensors:
        h.update(np.ascontiguousarray(t.data).tobytes())
    return h.hexdigest()


from . import ops  # noqa: E402  (circular: ops needs Tensor/Function)
