"""Reverse-mode automatic differentiation over float64 numpy arrays.

Every operation builds a graph node holding the forward value and a closure
that routes an incoming gradient to the operands.  Gradients accumulate, so
calling `backward` twice doubles them; `zero_grad` resets.  The LSTM cell and
the scoring gather are fused single nodes with hand-written backward rules,
which keeps graphs for whole sentences small.
"""

from __future__ import annotations

import threading

import numpy as np
from scipy.special import expit

_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


class no_grad:
    """Context manager that makes every op return a detached leaf.

    The switch is thread-local, so parallel decoding threads do not turn
    gradients off under a training loop.
    """

    def __enter__(self):
        self._prev = _grad_enabled()
        _state.enabled = False
        return self

    def __exit__(self, *exc):
        _state.enabled = self._prev
        return False


class Tensor:
    """A value in the computation graph."""

    __slots__ = ("value", "grad", "parents", "backward_fn", "needs_grad")

    def __init__(self, value, parents=(), backward_fn=None, needs_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.needs_grad = needs_grad

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, needs_grad={self.needs_grad})"


def parameter(value) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64), needs_grad=True)


def constant(value) -> Tensor:
    return Tensor(value)


def _accum(t: Tensor, g: np.ndarray):
    if not t.needs_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.value)
    t.grad += g


def _node(value, parents, backward_fn) -> Tensor:
    if _grad_enabled() and any(p.needs_grad for p in parents):
        return Tensor(value, tuple(parents), backward_fn, needs_grad=True)
    return Tensor(value)


def backward(root: Tensor, seed=None):
    """Propagate gradients from `root` to every parameter that fed it."""
    if seed is None:
        seed = np.ones_like(root.value)
    if not root.needs_grad:
        return
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.needs_grad and id(p) not in visited:
                stack.append((p, False))
    _accum(root, seed)
    for node in reversed(topo):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)


def zero_grad(tensors):
    for t in tensors:
        t.grad = None


def add(a: Tensor, b: Tensor) -> Tensor:
    def bw(g):
        _accum(a, g)
        _accum(b, g)
    return _node(a.value + b.value, (a, b), bw)


def add_many(parts: list[Tensor]) -> Tensor:
    total = parts[0].value.copy()
    for p in parts[1:]:
        total = total + p.value

    def bw(g):
        for p in parts:
            _accum(p, g)
    return _node(total, tuple(parts), bw)


def scale(a: Tensor, s: float) -> Tensor:
    def bw(g):
        _accum(a, g * s)
    return _node(a.value * s, (a,), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def bw(g):
        _accum(a, g * b.value)
        _accum(b, g * a.value)
    return _node(a.value * b.value, (a, b), bw)


def dot(a: Tensor, b: Tensor) -> Tensor:
    def bw(g):
        _accum(a, g * b.value)
        _accum(b, g * a.value)
    return _node(np.dot(a.value, b.value), (a, b), bw)


def concat(parts: list[Tensor]) -> Tensor:
    sizes = [p.value.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for p, lo, hi in zip(parts, offsets, offsets[1:]):
            _accum(p, g[lo:hi])
    return _node(np.concatenate([p.value for p in parts]), tuple(parts), bw)


def pick_slice(x: Tensor, lo: int, hi: int) -> Tensor:
    def bw(g):
        if x.needs_grad:
            full = np.zeros_like(x.value)
            full[lo:hi] = g
            _accum(x, full)
    return _node(x.value[lo:hi], (x,), bw)


def affine(W: Tensor, x: Tensor, b: Tensor) -> Tensor:
    """W @ x + b for a matrix parameter and vector operands."""
    def bw(g):
        _accum(W, np.outer(g, x.value))
        _accum(x, W.value.T @ g)
        _accum(b, g)
    return _node(W.value @ x.value + b.value, (W, x, b), bw)


def tanh_of(x: Tensor) -> Tensor:
    y = np.tanh(x.value)

    def bw(g):
        _accum(x, g * (1.0 - y * y))
    return _node(y, (x,), bw)


def sigmoid_of(x: Tensor) -> Tensor:
    y = expit(x.value)

    def bw(g):
        _accum(x, g * y * (1.0 - y))
    return _node(y, (x,), bw)


def relu(x: Tensor) -> Tensor:
    mask = x.value > 0

    def bw(g):
        _accum(x, g * mask)
    return _node(np.where(mask, x.value, 0.0), (x,), bw)


def embedding_row(table: Tensor, index: int) -> Tensor:
    def bw(g):
        if table.needs_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.value)
            table.grad[index] += g
    return _node(table.value[index].copy(), (table,), bw)


def lstm_cell(x: Tensor, h_prev: Tensor, c_prev: Tensor,
              Wx: Tensor, Wh: Tensor, b: Tensor) -> Tensor:
    """One LSTM step, returned as the concatenation [h; c].

    Gate pre-activations are packed input/forget/candidate/output; the whole
    cell is a single graph node with an analytic backward pass.
    """
    H = h_prev.value.shape[0]
    z = Wx.value @ x.value + Wh.value @ h_prev.value + b.value
    i = expit(z[:H])
    f = expit(z[H:2 * H])
    g_cand = np.tanh(z[2 * H:3 * H])
    o = expit(z[3 * H:])
    c_new = f * c_prev.value + i * g_cand
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c

    def bw(grad):
        gh = grad[:H]
        gc = grad[H:] + gh * o * (1.0 - tanh_c * tanh_c)
        dz = np.empty_like(z)
        dz[:H] = gc * g_cand * i * (1.0 - i)
        dz[H:2 * H] = gc * c_prev.value * f * (1.0 - f)
        dz[2 * H:3 * H] = gc * i * (1.0 - g_cand * g_cand)
        dz[3 * H:] = gh * tanh_c * o * (1.0 - o)
        _accum(Wx, np.outer(dz, x.value))
        _accum(x, Wx.value.T @ dz)
        _accum(Wh, np.outer(dz, h_prev.value))
        _accum(h_prev, Wh.value.T @ dz)
        _accum(b, dz)
        _accum(c_prev, gc * f)
    return _node(np.concatenate([h_new, c_new]),
                 (x, h_prev, c_prev, Wx, Wh, b), bw)


def gathered_scores(theta: Tensor, q: Tensor, ids: np.ndarray,
                    y: Tensor) -> Tensor:
    """Scores q_t + theta_t . y for the given rows of the action tables."""
    rows = theta.value[ids]

    def bw(g):
        _accum(y, rows.T @ g)
        if theta.needs_grad:
            if theta.grad is None:
                theta.grad = np.zeros_like(theta.value)
            np.add.at(theta.grad, ids, np.outer(g, y.value))
        if q.needs_grad:
            if q.grad is None:
                q.grad = np.zeros_like(q.value)
            np.add.at(q.grad, ids, g)
    return _node(rows @ y.value + q.value[ids], (theta, q, y), bw)


def neg_log_softmax(scores: Tensor, index: int) -> Tensor:
    """Log loss of the element at `index` under a softmax over `scores`."""
    s = scores.value
    m = s.max()
    lse = m + np.log(np.exp(s - m).sum())
    out = lse - s[index]

    def bw(g):
        p = np.exp(s - lse)
        p[index] -= 1.0
        _accum(scores, g * p)
    return _node(out, (scores,), bw)


def binary_log_loss(z: Tensor, target: float) -> Tensor:
    """Logistic loss -log p(target | z) for a scalar pre-activation."""
    zv = float(z.value)
    loss = max(zv, 0.0) - zv * target + np.log1p(np.exp(-abs(zv)))

    def bw(g):
        _accum(z, g * (expit(zv) - target))
    return _node(loss, (z,), bw)
