"""Small reverse-mode autodiff over float64 numpy arrays.

Every op builds its output eagerly and, when gradients are enabled and any
input requires them, records a closure mapping the output gradient to one
gradient per parent.  Masked softmax, layer norm and cross-entropy are fused
ops with hand-written backward passes.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64

_grad_enabled = True


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """Dense float64 array with an optional gradient accumulator."""

    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=DTYPE)

        # iterative post-order DFS; graphs here can be deeper than the recursion limit
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        grads: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def relu(self):
        return relu(self)


class Parameter(Tensor):
    """A trainable tensor; ``requires_grad`` is always on."""

    def __init__(self, data):
        super().__init__(np.array(data, dtype=DTYPE), requires_grad=True)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    needs_grad = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs_grad)
    if needs_grad:
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# op counting (used by the complexity instrumentation)
# ---------------------------------------------------------------------------

_counters: list["OpCounter"] = []
_scope: list[str] = []


class OpCounter:
    """Tallies matmul multiply-adds and attention score elements per scope.

    Use as a context manager; nested :func:`count_scope` blocks label the
    counts (e.g. ``"decoder.layers.0"``).
    """

    def __init__(self):
        self.macs: dict[str, int] = {}
        self.score_elements: dict[str, int] = {}

    def __enter__(self):
        _counters.append(self)
        return self

    def __exit__(self, *exc):
        _counters.remove(self)
        return False

    def _add(self, table: dict[str, int], amount: int):
        key = ".".join(_scope)
        table[key] = table.get(key, 0) + int(amount)


@contextlib.contextmanager
def count_scope(label: str):
    _scope.append(label)
    try:
        yield
    finally:
        _scope.pop()


def record_score_elements(n: int):
    for counter in _counters:
        counter._add(counter.score_elements, n)


# ---------------------------------------------------------------------------
# elementwise and structural ops
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"cannot add shapes {a.shape} and {b.shape}") from exc
    return _make(data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}") from exc
    return _make(
        data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def matmul(a, b) -> Tensor:
    """Batched matrix product over the last two axes (numpy broadcasting rules)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    data = np.matmul(a.data, b.data)
    if _counters:
        batch = int(np.prod(data.shape[:-2], dtype=np.int64))
        macs = batch * a.shape[-2] * a.shape[-1] * b.shape[-1]
        for counter in _counters:
            counter._add(counter.macs, macs)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2)) if a.requires_grad else None
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g) if b.requires_grad else None
        return (
            None if ga is None else _unbroadcast(ga, a.shape),
            None if gb is None else _unbroadcast(gb, b.shape),
        )

    return _make(data, (a, b), backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    positive = x.data > 0
    return _make(np.where(positive, x.data, 0.0), (x,), lambda g: (g * positive,))


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes) if axes else tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes))
    return _make(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def sum_(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(np.asarray(data), (x,), backward)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / float(count))


def take(x, index) -> Tensor:
    """Numpy-style indexing with a scatter-add backward."""
    x = as_tensor(x)
    data = x.data[index]

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return _make(np.array(data), (x,), backward)


def concat(tensors: Iterable, axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat needs at least one tensor")
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"cannot concat shapes {[p.shape for p in parts]} on axis {axis}") from exc
    bounds = np.cumsum([0] + [p.shape[axis] for p in parts])

    def backward(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(parts))
        )

    return _make(data, tuple(parts), backward)


def slice_axis(x, start: int, stop: int, axis: int = 0) -> Tensor:
    """``x[start:stop]`` along ``axis``; inverse of :func:`concat`."""
    x = as_tensor(x)
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    return take(x, tuple(index))


def embedding(table, ids) -> Tensor:
    """Row lookup; gradient scatter-adds into the table (repeated ids accumulate)."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    n_rows = table.shape[0]
    bad = np.argwhere((ids < 0) | (ids >= n_rows))
    if bad.size:
        pos = tuple(int(i) for i in bad[0])
        raise IndexError(f"token id {int(ids[pos])} at position {pos} outside [0, {n_rows})")

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    return _make(table.data[ids], (table,), backward)


# ---------------------------------------------------------------------------
# fused ops
# ---------------------------------------------------------------------------


def softmax_masked(scores, mask) -> Tensor:
    """Softmax over the last axis with blocked positions forced to zero.

    ``mask`` is boolean (True = blocked) and must broadcast to ``scores``.
    Rows where every entry is blocked come back as all zeros.
    """
    scores = as_tensor(scores)
    blocked = np.asarray(getattr(mask, "blocked", mask), dtype=bool)
    try:
        blocked = np.broadcast_to(blocked, scores.shape)
    except ValueError as exc:
        raise ShapeError(f"mask shape {blocked.shape} does not match scores {scores.shape}") from exc

    masked = np.where(blocked, -np.inf, scores.data)
    row_max = masked.max(axis=-1, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    exp = np.exp(masked - row_max)
    total = exp.sum(axis=-1, keepdims=True)
    probs = exp / np.where(total > 0, total, 1.0)

    def backward(g):
        inner = (g * probs).sum(axis=-1, keepdims=True)
        return (probs * (g - inner),)

    return _make(probs, (scores,), backward)


def layer_norm(x, gain, bias, eps: float = 1e-12) -> Tensor:
    """Normalize the last axis to zero mean / unit population variance."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        reduce_axes = tuple(range(g.ndim - 1))
        dxhat = g * gain.data
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=reduce_axes), g.sum(axis=reduce_axes)

    return _make(out, (x, gain, bias), backward)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Plain numpy log-softmax over the last axis (no graph)."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy(logits, targets, ignore_index: int | None = None) -> Tensor:
    """Mean negative log-likelihood of ``targets`` over non-ignored rows.

    If every row is ignored the loss is 0 with a zero gradient.
    """
    logits = as_tensor(logits)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects [n, V] logits, got {logits.shape}")
    targets = np.asarray(targets, dtype=np.int64)
    n, vocab = logits.shape
    if targets.shape != (n,):
        raise ShapeError(f"targets shape {targets.shape} does not match logits {logits.shape}")
    keep = np.ones(n, dtype=bool) if ignore_index is None else targets != ignore_index
    if np.any((targets[keep] < 0) | (targets[keep] >= vocab)):
        raise IndexError(f"target id outside [0, {vocab})")
    count = int(keep.sum())
    rows = np.nonzero(keep)[0]

    logp = log_softmax(logits.data)
    loss = -logp[rows, targets[rows]].sum() / count if count else 0.0

    def backward(g):
        grad = np.zeros_like(logits.data)
        if count:
            grad[rows] = np.exp(logp[rows])
            grad[rows, targets[rows]] -= 1.0
            grad /= count
        return (grad * g,)

    return _make(np.asarray(loss, dtype=DTYPE), (logits,), backward)
