"""Reverse-mode automatic differentiation on a small operation tape.

Define-by-run: each training iteration builds a fresh Tape, runs the
forward pass through the primitives below, then calls ``backward`` on a
scalar loss node. Gradients accumulate into ``Node.grad``; the caller
zeroes between passes. Every value is a 2-D float64 array, scalars are
shape (1, 1).

The primitive set is exactly what the network forward pass needs:
matmul, add, subtract, elementwise mul, scalar_mul, transpose, relu,
fixed batch norm, matrix inverse, upper-triangular mask, column slice,
and squared Frobenius norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InvalidConfig, InvalidShape, NumericalFailure

__all__ = [
    "Node",
    "Tape",
    "AdamState",
    "adam_step",
    "lr_schedule",
    "batch_norm_stats",
]


class Node:
    """One tape entry: a value, an accumulated gradient, and parents.

    ``grad`` holds the sum over completed backward passes; ``_adj`` is
    the scratch adjoint of the pass in flight.
    """

    __slots__ = ("value", "grad", "parents", "_backward", "_adj")

    def __init__(self, value, parents=(), backward=None):
        self.value = value
        self.grad = None
        self.parents = parents
        self._backward = backward
        self._adj = None

    @property
    def shape(self):
        return self.value.shape


def _as_value(x, name: str) -> np.ndarray:
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise InvalidShape(f"{name} must be 2-D (scalars as (1,1)), got ndim={a.ndim}")
    return a


def batch_norm_stats(x: np.ndarray, eps: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Column mean and sqrt(population variance + eps) of a batch.

    The same convention the batch_norm_fixed primitive applies, exposed
    so callers can freeze statistics for later single-sample scoring.
    """
    mean = x.mean(axis=0)
    sigma = np.sqrt(x.var(axis=0) + eps)
    return mean, sigma


class Tape:
    """Records primitives in execution order for one backward sweep."""

    def __init__(self):
        self._nodes: list[Node] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def _record(self, value, parents=(), backward=None) -> Node:
        node = Node(value, parents, backward)
        self._nodes.append(node)
        return node

    def leaf(self, value) -> Node:
        """Wrap an input or parameter array (no copy) as a tape leaf."""
        return self._record(_as_value(value, "leaf"))

    # binary elementwise ops; the right operand may be a (1, k) row that
    # broadcasts over rows, in which case its gradient sums over axis 0

    @staticmethod
    def _check_ew(a: Node, b: Node, op: str) -> bool:
        if a.shape == b.shape:
            return False
        if b.shape == (1, a.shape[1]):
            return True
        raise InvalidShape(f"{op}: shapes {a.shape} and {b.shape} are incompatible")

    def add(self, a: Node, b: Node) -> Node:
        broadcast = self._check_ew(a, b, "add")

        def backward(g, out):
            _accum(a, g)
            _accum(b, g.sum(axis=0, keepdims=True) if broadcast else g)

        return self._record(a.value + b.value, (a, b), backward)

    def subtract(self, a: Node, b: Node) -> Node:
        broadcast = self._check_ew(a, b, "subtract")

        def backward(g, out):
            _accum(a, g)
            gb = g.sum(axis=0, keepdims=True) if broadcast else g
            _accum(b, -gb)

        return self._record(a.value - b.value, (a, b), backward)

    def mul(self, a: Node, b: Node) -> Node:
        broadcast = self._check_ew(a, b, "mul")

        def backward(g, out):
            _accum(a, g * b.value)
            gb = g * a.value
            _accum(b, gb.sum(axis=0, keepdims=True) if broadcast else gb)

        return self._record(a.value * b.value, (a, b), backward)

    def scalar_mul(self, c: float, a: Node) -> Node:
        c = float(c)

        def backward(g, out):
            _accum(a, c * g)

        return self._record(c * a.value, (a,), backward)

    def matmul(self, a: Node, b: Node) -> Node:
        if a.shape[1] != b.shape[0]:
            raise InvalidShape(f"matmul: inner dims {a.shape} @ {b.shape}")

        def backward(g, out):
            _accum(a, g @ b.value.T)
            _accum(b, a.value.T @ g)

        return self._record(a.value @ b.value, (a, b), backward)

    def transpose(self, a: Node) -> Node:
        def backward(g, out):
            _accum(a, g.T)

        return self._record(np.ascontiguousarray(a.value.T), (a,), backward)

    def relu(self, a: Node) -> Node:
        mask = a.value > 0.0

        def backward(g, out):
            _accum(a, g * mask)

        return self._record(np.where(mask, a.value, 0.0), (a,), backward)

    def batch_norm_fixed(self, a: Node, eps: float = 1e-8) -> Node:
        """Column-wise (x - mean) / sqrt(var + eps), gamma=1, beta=0.

        Population variance over the batch; the batch must have at
        least 2 rows for the statistics to be meaningful.
        """
        if a.shape[0] < 2:
            raise InvalidShape("batch_norm_fixed needs at least 2 rows")
        mean, sigma = batch_norm_stats(a.value, eps)
        y = (a.value - mean) / sigma
        n = a.shape[0]

        def backward(g, out):
            # d/dx of ((x - mean)/sigma) with mean, sigma functions of x
            gy = (g * y).mean(axis=0)
            _accum(a, (g - g.mean(axis=0) - y * gy) / sigma)

        node = self._record(y, (a,), backward)
        return node

    def matrix_inverse(self, a: Node) -> Node:
        inv = linalg.invert(a.value)

        def backward(g, out):
            _accum(a, -(inv.T @ g @ inv.T))

        return self._record(inv, (a,), backward)

    def upper_triangular(self, a: Node) -> Node:
        def backward(g, out):
            _accum(a, np.triu(g))

        return self._record(np.triu(a.value), (a,), backward)

    def slice_columns(self, a: Node, start: int, stop: int) -> Node:
        if not (0 <= start < stop <= a.shape[1]):
            raise InvalidShape(
                f"slice_columns: [{start}:{stop}] out of range for {a.shape[1]} columns"
            )

        def backward(g, out):
            full = np.zeros_like(a.value)
            full[:, start:stop] = g
            _accum(a, full)

        return self._record(np.ascontiguousarray(a.value[:, start:stop]), (a,), backward)

    def frobenius_sq(self, a: Node) -> Node:
        val = np.array([[float(np.sum(a.value * a.value))]])

        def backward(g, out):
            _accum(a, (2.0 * g[0, 0]) * a.value)

        return self._record(val, (a,), backward)

    def zero_grad(self) -> None:
        for node in self._nodes:
            node.grad = None

    def backward(self, loss: Node) -> None:
        """Accumulate d(loss)/d(node) into .grad for every tape node.

        The loss must be a (1, 1) node recorded on this tape. Each call
        sweeps fresh adjoints and then adds them onto .grad, so two
        passes without zero_grad yield exactly twice the gradient.
        Disconnected nodes end with an exact zero gradient.

        Raises:
            InvalidShape: Loss is not scalar or not on this tape.
        """
        if loss.shape != (1, 1):
            raise InvalidShape(f"loss must be (1,1), got {loss.shape}")
        if not any(loss is node for node in self._nodes):
            raise InvalidShape("loss node does not belong to this tape")
        for node in self._nodes:
            node._adj = np.zeros_like(node.value)
        loss._adj[0, 0] = 1.0
        for node in reversed(self._nodes):
            if node._backward is not None:
                node._backward(node._adj, node)
        for node in self._nodes:
            node.grad = node._adj if node.grad is None else node.grad + node._adj
            node._adj = None


def _accum(node: Node, g: np.ndarray) -> None:
    node._adj += g


@dataclass
class AdamState:
    """First/second moment buffers and the shared step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params, beta1: float = 0.9, beta2: float = 0.999,
             eps: float = 1e-8) -> "AdamState":
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0 and eps > 0.0):
            raise InvalidConfig("adam moments need 0 <= beta < 1 and eps > 0")
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(params, grads, state: AdamState, lr: float):
    """One bias-corrected Adam update, applied to params in place.

    theta -= lr * m_hat / (sqrt(v_hat) + eps), with eps added outside
    the square root.

    Raises:
        InvalidShape: params/grads/state lengths or shapes disagree.
        NumericalFailure: A gradient contains NaN or Inf (the message
            names the parameter index).
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise InvalidShape("params, grads, and state must have equal length")
    if lr <= 0.0:
        raise InvalidConfig(f"learning rate must be positive, got {lr}")
    for i, g in enumerate(grads):
        if g.shape != params[i].shape:
            raise InvalidShape(f"grad {i} shape {g.shape} != param shape {params[i].shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalFailure(f"non-finite gradient for parameter {i}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


def lr_schedule(iteration: int, base: float = 0.01, decay: float = 0.7,
                period: int = 350) -> float:
    """Staircase decay: base * decay ** floor(iteration / period)."""
    if iteration < 0:
        raise InvalidConfig(f"iteration must be >= 0, got {iteration}")
    if base <= 0.0 or not (0.0 < decay <= 1.0) or period < 1:
        raise InvalidConfig("need base > 0, 0 < decay <= 1, period >= 1")
    return base * decay ** (iteration // period)
