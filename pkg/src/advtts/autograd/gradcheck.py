"""Central finite-difference checks of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, set_grad_enabled


@dataclass
class GradcheckResult:
    name: str
    rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.rel_error < self.tolerance)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``||a - n|| / max(||a||, ||n||)``, with an absolute floor for all-zero gradients."""
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < 1e-12:
        return float(diff)
    return float(diff / scale)


def numeric_grad(fn: Callable[[], Tensor], x: Tensor, step: float = 1e-5,
                 indices: Sequence[int] | None = None, record: bool = False) -> np.ndarray:
    """Central differences of the scalar ``fn()`` with respect to ``x.data``.

    ``indices`` restricts the probe to a subset of flat positions; the rest of
    the returned array is NaN.  Set ``record`` when ``fn`` itself takes
    gradients (a gradient penalty, say) and so needs the graph.
    """
    flat = x.data.reshape(-1)
    out = np.full(flat.shape, np.nan) if indices is not None else np.empty(flat.shape)
    positions = range(flat.size) if indices is None else indices
    with set_grad_enabled(record):
        for i in positions:
            orig = flat[i]
            flat[i] = orig + step
            hi = fn().item()
            flat[i] = orig - step
            lo = fn().item()
            flat[i] = orig
            out[i] = (hi - lo) / (2 * step)
    return out.reshape(x.shape)


def analytic_grads(fn: Callable[[], Tensor], inputs: Sequence[Tensor]) -> list[np.ndarray]:
    for t in inputs:
        t.grad = None
    loss = fn()
    backward(loss)
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in inputs]


def gradcheck(fn: Callable[[], Tensor], inputs: Sequence[Tensor], step: float = 1e-5,
              tolerance: float = 1e-6, name: str = "fn", max_probes: int | None = None,
              rng: np.random.Generator | None = None, record: bool = False) -> GradcheckResult:
    """Compare backward() against central differences for every input.

    ``max_probes`` caps the number of coordinates probed per input (sampled
    with ``rng``), for large parameter sets.
    """
    analytic = analytic_grads(fn, inputs)
    worst = 0.0
    for t, a in zip(inputs, analytic):
        if max_probes is not None and t.size > max_probes:
            rng = rng or np.random.default_rng(0)
            idx = np.sort(rng.choice(t.size, size=max_probes, replace=False))
            n = numeric_grad(fn, t, step, idx, record)
            err = relative_error(a.reshape(-1)[idx], n.reshape(-1)[idx])
        else:
            err = relative_error(a, numeric_grad(fn, t, step, record=record))
        worst = max(worst, err)
    return GradcheckResult(name, worst, tolerance)


def random_inputs(rng: np.random.Generator, *shapes, positive: bool = False) -> list[Tensor]:
    out = []
    for shape in shapes:
        data = rng.uniform(0.5, 2.0, size=shape) if positive else rng.normal(size=shape)
        out.append(Tensor(data, requires_grad=True))
    return out
