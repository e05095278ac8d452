"""Minimal reverse-mode automatic differentiation over NumPy arrays.

A Tensor wraps an ndarray plus an optional gradient; ops build a DAG of
closures that is walked once, in reverse topological order, by
:func:`backward`. The op set is exactly what the training objectives need;
heavy lifting (affine layers) is delegated to :mod:`sadvae.kernels`.

Dtype discipline: every op preserves the dtype of its inputs, so the same
graph code runs in float32 for training and float64 for gradient checks.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import ShapeError


class Tensor:
    """Node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def parameter(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=True)


def _node(data, parents: Sequence[Tensor], bwd: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = bwd
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def backward(root: Tensor) -> None:
    """Populate .grad on every requires_grad node reachable from root."""
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, ready = stack.pop()
        if ready:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad:
                stack.append((p, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


def zero_grads(params: Sequence[Tensor]) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# Ops
# ---------------------------------------------------------------------------

def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w.T + b for a batch of rows."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise ShapeError(
            f"affine: input {x.data.shape} incompatible with weight {w.data.shape}"
        )
    xd = np.ascontiguousarray(x.data)
    y = kernels.affine_forward(xd, w.data, b.data)

    def bwd(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            _accum(x, kernels.affine_backward_input(w.data, g))
        if w.requires_grad:
            _accum(w, kernels.affine_backward_weight(xd, g))
        if b.requires_grad:
            _accum(b, kernels.affine_backward_bias(g))

    return _node(y, (x, w, b), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add: {a.data.shape} vs {b.data.shape}")

    def bwd(g):
        _accum(a, g)
        _accum(b, g)

    return _node(a.data + b.data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul: {a.data.shape} vs {b.data.shape}")

    def bwd(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _node(a.data * b.data, (a, b), bwd)


def scale(x: Tensor, c: float) -> Tensor:
    def bwd(g):
        _accum(x, g * c)

    return _node(x.data * c, (x,), bwd)


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)

    def bwd(g):
        _accum(x, g * y)

    return _node(y, (x,), bwd)


def log(x: Tensor) -> Tensor:
    def bwd(g):
        _accum(x, g / x.data)

    return _node(np.log(x.data), (x,), bwd)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def bwd(g):
        _accum(x, g * mask)

    return _node(np.where(mask, x.data, x.data.dtype.type(0)), (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    y = expit(x.data)

    def bwd(g):
        _accum(x, g * y * (1.0 - y))

    return _node(y, (x,), bwd)


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    mask = (x.data > lo) & (x.data < hi)

    def bwd(g):
        _accum(x, g * mask)

    return _node(np.clip(x.data, lo, hi), (x,), bwd)


def one_minus(x: Tensor) -> Tensor:
    def bwd(g):
        _accum(x, -g)

    return _node(1.0 - x.data, (x,), bwd)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Column-wise concatenation; either side may have width 0."""
    if a.data.shape[0] != b.data.shape[0]:
        raise ShapeError(f"concat_cols: row counts {a.data.shape[0]} vs {b.data.shape[0]}")
    wa = a.data.shape[1]

    def bwd(g):
        _accum(a, g[:, :wa])
        _accum(b, g[:, wa:])

    return _node(np.concatenate([a.data, b.data], axis=1), (a, b), bwd)


def permute_rows(x: Tensor, perm: np.ndarray) -> Tensor:
    """Reorder batch rows; gradients route back through the inverse map."""
    perm = np.asarray(perm)
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(perm.size)

    def bwd(g):
        _accum(x, g[inverse])

    return _node(x.data[perm], (x,), bwd)


def slice_cols(x: Tensor, lo: int, hi: int) -> Tensor:
    def bwd(g):
        full = np.zeros_like(x.data)
        full[:, lo:hi] = g
        _accum(x, full)

    return _node(x.data[:, lo:hi].copy(), (x,), bwd)


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size

    def bwd(g):
        _accum(x, np.full_like(x.data, g / n))

    return _node(x.data.mean(), (x,), bwd)


def sse_mean(pred: Tensor, target: np.ndarray) -> Tensor:
    """Squared error summed over feature dims, averaged over the batch."""
    if pred.data.shape != target.shape:
        raise ShapeError(f"sse_mean: {pred.data.shape} vs {target.shape}")
    n = pred.data.shape[0] if pred.data.ndim == 2 else 1
    diff = pred.data - target

    def bwd(g):
        _accum(pred, (2.0 / n) * g * diff)

    return _node((diff * diff).sum() / n, (pred,), bwd)


def gaussian_kl_mean(mean: Tensor, log_var: Tensor) -> Tensor:
    """Batch mean of KL(N(mean, exp(log_var)) || N(0, I)), diagonal case."""
    if mean.data.shape != log_var.data.shape:
        raise ShapeError(f"gaussian_kl_mean: {mean.data.shape} vs {log_var.data.shape}")
    n = mean.data.shape[0] if mean.data.ndim == 2 else 1
    ev_minus_one = np.expm1(log_var.data)
    val = 0.5 * (mean.data * mean.data + ev_minus_one - log_var.data).sum() / n

    def bwd(g):
        _accum(mean, (g / n) * mean.data)
        _accum(log_var, (0.5 * g / n) * ev_minus_one)

    return _node(np.asarray(val, dtype=mean.data.dtype), (mean, log_var), bwd)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of softmax(logits) against integer labels."""
    z = logits.data
    n = z.shape[0]
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    val = -logp[np.arange(n), labels].mean()

    def bwd(g):
        grad = np.exp(logp)
        grad[np.arange(n), labels] -= 1.0
        _accum(logits, (g / n) * grad)

    return _node(np.asarray(val, dtype=z.dtype), (logits,), bwd)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Plain (non-graph) stable softmax over the last axis."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)
