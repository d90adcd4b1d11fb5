"""Simple recurrent unit layers.

Per step::

    x~_t = W x_t
    f_t  = sigmoid(W_f x_t + b_f)
    r_t  = sigmoid(W_r x_t + b_r)
    c_t  = f_t * c_{t-1} + (1 - f_t) * x~_t
    h_t  = r_t * relu(c_t) + (1 - r_t) * x_t

Gates never read the recurrent state, so they are computed for the whole
sequence by one matrix product; only the elementwise ``c`` recurrence is
sequential.  When input and hidden widths differ the highway term uses a
learned projection of ``x_t``.
"""
from __future__ import annotations

import numpy as np

from ..autograd import DimensionError, Function, Tensor, concat, flip, relu, sigmoid
from .module import Module, Parameter, glorot


class SruScan(Function):
    """``c_t = f_t * c_{t-1} + (1 - f_t) * x_t`` over the rows of ``f`` and ``x``."""

    name = "sru_scan"
    double_differentiable = False

    def forward(self, f, x, c0):
        if f.shape != x.shape or f.ndim != 2 or c0.shape != f.shape[1:]:
            raise DimensionError(f"sru_scan: shapes f{f.shape} x{x.shape} c0{c0.shape} disagree")
        c = np.empty_like(f)
        prev = c0
        for t in range(f.shape[0]):
            prev = f[t] * prev + (1.0 - f[t]) * x[t]
            c[t] = prev
        self.c = c
        return c

    def backward(self, grad):
        f, x, c0 = (t.data for t in self.inputs)
        g = grad.data
        gf, gx = np.empty_like(f), np.empty_like(f)
        carry = np.zeros_like(c0)
        for t in range(f.shape[0] - 1, -1, -1):
            gc = g[t] + carry
            prev = self.c[t - 1] if t > 0 else c0
            gf[t] = gc * (prev - x[t])
            gx[t] = gc * (1.0 - f[t])
            carry = gc * f[t]
        return Tensor(gf), Tensor(gx), Tensor(carry)


def sru_scan(f: Tensor, x: Tensor, c0: Tensor) -> Tensor:
    return SruScan.apply(f, x, c0)


class SruLayer(Module):
    """One direction.  ``weight`` stacks ``[W | W_f | W_r]`` as ``(in, 3 * hidden)``."""

    def __init__(self, rng: np.random.Generator, n_in: int, hidden: int, direction: str = "forward"):
        if direction not in ("forward", "backward"):
            raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
        self.n_in, self.hidden, self.direction = n_in, hidden, direction
        self.weight = glorot(rng, n_in, hidden, (n_in, 3 * hidden))
        self.bias_f = Parameter(np.zeros(hidden))
        self.bias_r = Parameter(np.zeros(hidden))
        self.highway = glorot(rng, n_in, hidden, (n_in, hidden)) if n_in != hidden else None

    def gates(self, seq: Tensor):
        """Candidate, forget gate, reset gate and highway term for every step."""
        if seq.ndim != 2 or seq.shape[1] != self.n_in:
            raise DimensionError(f"SRU expects (T, {self.n_in}) input, got {seq.shape}")
        H = self.hidden
        u = seq @ self.weight
        cand = u[:, :H]
        f = sigmoid(u[:, H:2 * H] + self.bias_f)
        r = sigmoid(u[:, 2 * H:] + self.bias_r)
        hw = seq @ self.highway if self.highway is not None else seq
        return cand, f, r, hw

    def run(self, seq: Tensor, c0: Tensor | None = None) -> Tensor:
        """Left-to-right pass regardless of ``direction``."""
        cand, f, r, hw = self.gates(seq)
        c0 = c0 if c0 is not None else Tensor(np.zeros(self.hidden))
        c = sru_scan(f, cand, c0)
        return r * relu(c) + (1.0 - r) * hw

    def __call__(self, seq: Tensor) -> Tensor:
        if self.direction == "forward":
            return self.run(seq)
        return flip(self.run(flip(seq)))


def sru_cell_step(x_t: Tensor, c_prev: Tensor, layer: SruLayer) -> tuple[Tensor, Tensor]:
    """One recurrence step on a single input vector; returns ``(h_t, c_t)``."""
    if x_t.shape != (layer.n_in,) or c_prev.shape != (layer.hidden,):
        raise DimensionError(
            f"sru_cell_step: x_t{x_t.shape} / c_prev{c_prev.shape} do not match layer "
            f"({layer.n_in} -> {layer.hidden})")
    H = layer.hidden
    row = x_t.reshape(1, layer.n_in)
    u = (row @ layer.weight).reshape(3 * H)
    f = sigmoid(u[H:2 * H] + layer.bias_f)
    r = sigmoid(u[2 * H:] + layer.bias_r)
    c_t = f * c_prev + (1.0 - f) * u[:H]
    hw = (row @ layer.highway).reshape(H) if layer.highway is not None else x_t
    h_t = r * relu(c_t) + (1.0 - r) * hw
    return h_t, c_t


def sru_layer(seq: Tensor, layer: SruLayer, direction: str | None = None) -> Tensor:
    direction = direction or layer.direction
    if direction == "forward":
        return layer.run(seq)
    return flip(layer.run(flip(seq)))


class BiSru(Module):
    """Forward and backward SRU layers with outputs concatenated to ``2 * hidden``."""

    def __init__(self, rng: np.random.Generator, n_in: int, hidden: int):
        self.fwd = SruLayer(rng, n_in, hidden, "forward")
        self.bwd = SruLayer(rng, n_in, hidden, "backward")

    def __call__(self, seq: Tensor) -> Tensor:
        return concat([self.fwd(seq), self.bwd(seq)], axis=1)
