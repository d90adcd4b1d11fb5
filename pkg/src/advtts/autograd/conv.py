"""Causal dilated and transposed 1-D convolutions over ``channels x time`` tensors.

Both operations have first-order backward rules only.
"""
from __future__ import annotations

import numpy as np

from .tensor import DimensionError, Function, Tensor


class Conv1dCausal(Function):
    """``y[:, t] = sum_j w[:, :, j] @ x[:, t - (kw - 1 - j) * dilation]``.

    Tap ``kw - 1`` is the current sample; the left edge is zero padded.
    """

    name = "conv1d_causal"
    double_differentiable = False

    def forward(self, x, w, dilation=1):
        if x.ndim != 2 or w.ndim != 3 or w.shape[1] != x.shape[0]:
            raise DimensionError(
                f"conv1d_causal: input {x.shape} does not match weights {w.shape}")
        if dilation < 1 or w.shape[2] < 1:
            raise DimensionError("conv1d_causal: dilation and kernel width must be positive")
        kw, T = w.shape[2], x.shape[1]
        self.dilation = int(dilation)
        self.pad = (kw - 1) * self.dilation
        self.xp = np.pad(x, ((0, 0), (self.pad, 0)))
        out = np.zeros((w.shape[0], T))
        for j in range(kw):
            s = j * self.dilation
            out += w[:, :, j] @ self.xp[:, s:s + T]
        return out

    def backward(self, grad):
        x, w = self.inputs
        g = grad.data
        kw, T = w.shape[2], x.shape[1]
        gx = gw = None
        if self.needs_input_grad[0]:
            gxp = np.zeros_like(self.xp)
            for j in range(kw):
                s = j * self.dilation
                gxp[:, s:s + T] += w.data[:, :, j].T @ g
            gx = Tensor(gxp[:, self.pad:])
        if self.needs_input_grad[1]:
            gw_arr = np.empty_like(w.data)
            for j in range(kw):
                s = j * self.dilation
                gw_arr[:, :, j] = g @ self.xp[:, s:s + T].T
            gw = Tensor(gw_arr)
        return gx, gw


class ConvTranspose1d(Function):
    """Transposed convolution with output cropped to exactly ``T * stride``.

    ``w`` has shape ``(in, out, k)``.  The full output has length
    ``(T - 1) * stride + k``; it is cropped starting at ``(k - stride) // 2``
    (or zero padded on the right when ``k < stride``).
    """

    name = "conv_transpose1d"
    double_differentiable = False

    def forward(self, x, w, stride=1):
        if x.ndim != 2 or w.ndim != 3 or w.shape[0] != x.shape[0]:
            raise DimensionError(
                f"conv_transpose1d: input {x.shape} does not match weights {w.shape}")
        if stride < 1:
            raise DimensionError("conv_transpose1d: stride must be positive")
        self.stride = s = int(stride)
        T, k = x.shape[1], w.shape[2]
        self.full_len = (T - 1) * s + k
        self.offset = max(0, (k - s) // 2)
        full = np.zeros((w.shape[1], max(self.full_len, self.offset + T * s)))
        for j in range(k):
            full[:, j:j + (T - 1) * s + 1:s] += w[:, :, j].T @ x
        return full[:, self.offset:self.offset + T * s]

    def backward(self, grad):
        x, w = self.inputs
        s, T, k = self.stride, x.shape[1], w.shape[2]
        gfull = np.zeros((w.shape[1], max(self.full_len, self.offset + T * s)))
        gfull[:, self.offset:self.offset + T * s] = grad.data
        gx = gw = None
        if self.needs_input_grad[0]:
            acc = np.zeros_like(x.data)
            for j in range(k):
                acc += w.data[:, :, j] @ gfull[:, j:j + (T - 1) * s + 1:s]
            gx = Tensor(acc)
        if self.needs_input_grad[1]:
            gw_arr = np.empty_like(w.data)
            for j in range(k):
                gw_arr[:, :, j] = x.data @ gfull[:, j:j + (T - 1) * s + 1:s].T
            gw = Tensor(gw_arr)
        return gx, gw


def conv1d_causal(x, w, dilation: int = 1) -> Tensor:
    return Conv1dCausal.apply(x, w, dilation=dilation)


def conv_transpose1d(x, w, stride: int = 1) -> Tensor:
    return ConvTranspose1d.apply(x, w, stride=stride)


def receptive_field(dilations, kernel_width: int = 2) -> int:
    """Number of past inputs that can influence one output of a causal stack."""
    return 1 + sum((kernel_width - 1) * int(d) for d in dilations)
