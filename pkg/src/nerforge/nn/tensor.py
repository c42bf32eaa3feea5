"""Reverse-mode autodiff over float64 numpy arrays.

A tiny tape: each op returns a ``Tensor`` holding its value, its parents and
a closure that routes the incoming gradient to them.  Graphs are built per
forward pass and discarded after ``backward()``.  Only the operations the
tagger needs are provided; shapes are vectors, matrices and scalars.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

LOG_FLOOR = 1e-12


class ShapeMismatchError(Exception):
    pass


class DegenerateInputError(Exception):
    pass


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_bw")

    def __init__(self, data, _parents: tuple = (), _bw: Callable | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._bw = _bw

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable leaf."""
        if self.data.shape != ():
            raise ShapeMismatchError("backward() requires a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        _accum(self, np.ones((), dtype=np.float64))
        for node in reversed(order):
            if node._bw is not None and node.grad is not None:
                node._bw(node.grad)

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, -as_tensor(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / float(other))
        raise TypeError("tensor division only by python numbers")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def constant(x) -> Tensor:
    return Tensor(np.asarray(x, dtype=np.float64))


def add(a: Tensor, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeMismatchError(f"add: {a.shape} vs {b.shape}")
    out = Tensor(a.data + b.data, (a, b))

    def bw(g):
        _accum(a, g if a.shape == out.shape else g.sum())
        _accum(b, g if b.shape == out.shape else g.sum())

    out._bw = bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeMismatchError(f"mul: {a.shape} vs {b.shape}")
    out = Tensor(a.data * b.data, (a, b))

    def bw(g):
        ga = g * b.data
        gb = g * a.data
        _accum(a, ga if a.shape == out.shape else ga.sum())
        _accum(b, gb if b.shape == out.shape else gb.sum())

    out._bw = bw
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c, (a,))
    out._bw = lambda g: _accum(a, g * c)
    return out


def cmul(a: Tensor, const) -> Tensor:
    """Elementwise product with a non-differentiable constant array."""
    const = np.asarray(const, dtype=np.float64)
    if const.shape != a.shape:
        raise ShapeMismatchError(f"cmul: {a.shape} vs {const.shape}")
    out = Tensor(a.data * const, (a,))
    out._bw = lambda g: _accum(a, g * const)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim == 0 or b.data.ndim == 0:
        raise ShapeMismatchError("matmul needs vectors or matrices")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeMismatchError(f"matmul: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data, (a, b))

    def bw(g):
        if a.data.ndim == 2 and b.data.ndim == 2:
            _accum(a, g @ b.data.T)
            _accum(b, a.data.T @ g)
        elif a.data.ndim == 2 and b.data.ndim == 1:
            _accum(a, np.outer(g, b.data))
            _accum(b, a.data.T @ g)
        elif a.data.ndim == 1 and b.data.ndim == 2:
            _accum(a, b.data @ g)
            _accum(b, np.outer(a.data, g))
        else:  # vector . vector
            _accum(a, g * b.data)
            _accum(b, g * a.data)

    out._bw = bw
    return out


def affine(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """y = x W^T + b for a (L, d_in) matrix or a (d_in,) vector of inputs."""
    if W.data.ndim != 2 or b.data.ndim != 1:
        raise ShapeMismatchError("affine expects W matrix and b vector")
    d_out, d_in = W.shape
    if b.shape != (d_out,):
        raise ShapeMismatchError(f"affine: b {b.shape} vs W {W.shape}")
    if x.data.ndim == 1:
        if x.shape != (d_in,):
            raise ShapeMismatchError(f"affine: x {x.shape} vs W {W.shape}")
        out = Tensor(W.data @ x.data + b.data, (x, W, b))

        def bw(g):
            _accum(x, W.data.T @ g)
            _accum(W, np.outer(g, x.data))
            _accum(b, g)

    elif x.data.ndim == 2:
        if x.shape[1] != d_in:
            raise ShapeMismatchError(f"affine: x {x.shape} vs W {W.shape}")
        out = Tensor(x.data @ W.data.T + b.data, (x, W, b))

        def bw(g):
            _accum(x, g @ W.data)
            _accum(W, g.T @ x.data)
            _accum(b, g.sum(axis=0))

    else:
        raise ShapeMismatchError(f"affine: bad input rank {x.data.ndim}")
    out._bw = bw
    return out


def tanh(t: Tensor) -> Tensor:
    y = np.tanh(t.data)
    out = Tensor(y, (t,))
    out._bw = lambda g: _accum(t, g * (1.0 - y * y))
    return out


def sigmoid(t: Tensor) -> Tensor:
    z = t.data
    y = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    out = Tensor(y, (t,))
    out._bw = lambda g: _accum(t, g * y * (1.0 - y))
    return out


def log_clamped(t: Tensor, floor: float = LOG_FLOOR) -> Tensor:
    """log(max(t, floor)); gradient is zero where the clamp is active."""
    clipped = np.maximum(t.data, floor)
    out = Tensor(np.log(clipped), (t,))
    mask = t.data > floor
    out._bw = lambda g: _accum(t, np.where(mask, g / clipped, 0.0))
    return out


def softmax(z: Tensor) -> Tensor:
    """Row-wise stable softmax of a vector or matrix of logits."""
    if not np.all(np.isfinite(z.data)):
        raise DegenerateInputError("softmax: non-finite logits")
    shifted = z.data - z.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    p = exp / exp.sum(axis=-1, keepdims=True)
    out = Tensor(p, (z,))

    def bw(g):
        inner = (g * p).sum(axis=-1, keepdims=True)
        _accum(z, p * (g - inner))

    out._bw = bw
    return out


def sum_all(t: Tensor) -> Tensor:
    out = Tensor(t.data.sum(), (t,))
    out._bw = lambda g: _accum(t, np.full_like(t.data, float(g)))
    return out


def mean_rows(t: Tensor) -> Tensor:
    """Mean over axis 0 of a (L, d) matrix, giving a (d,) vector."""
    if t.data.ndim != 2:
        raise ShapeMismatchError("mean_rows expects a matrix")
    L = t.shape[0]
    out = Tensor(t.data.mean(axis=0), (t,))
    out._bw = lambda g: _accum(t, np.tile(g / L, (L, 1)))
    return out


def slice_rows(t: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(t.data[start:stop].copy(), (t,))

    def bw(g):
        full = np.zeros_like(t.data)
        full[start:stop] = g
        _accum(t, full)

    out._bw = bw
    return out


def pick_row(t: Tensor, i: int) -> Tensor:
    out = Tensor(t.data[i].copy(), (t,))

    def bw(g):
        full = np.zeros_like(t.data)
        full[i] = g
        _accum(t, full)

    out._bw = bw
    return out


def pick_rows(t: Tensor, indices: Sequence[int]) -> Tensor:
    """Gather rows by index (with repeats); the embedding lookup."""
    idx = np.asarray(indices, dtype=np.intp)
    out = Tensor(t.data[idx].copy(), (t,))

    def bw(g):
        full = np.zeros_like(t.data)
        np.add.at(full, idx, g)
        _accum(t, full)

    out._bw = bw
    return out


def stack_rows(rows: Sequence[Tensor]) -> Tensor:
    if not rows:
        raise ShapeMismatchError("stack_rows of nothing")
    out = Tensor(np.stack([r.data for r in rows]), tuple(rows))

    def bw(g):
        for i, r in enumerate(rows):
            _accum(r, g[i])

    out._bw = bw
    return out


def hconcat(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeMismatchError(f"hconcat: {a.shape} vs {b.shape}")
    da = a.shape[1]
    out = Tensor(np.concatenate([a.data, b.data], axis=1), (a, b))

    def bw(g):
        _accum(a, g[:, :da])
        _accum(b, g[:, da:])

    out._bw = bw
    return out


def squeeze_col(t: Tensor) -> Tensor:
    if t.data.ndim != 2 or t.shape[1] != 1:
        raise ShapeMismatchError(f"squeeze_col: {t.shape}")
    out = Tensor(t.data[:, 0].copy(), (t,))
    out._bw = lambda g: _accum(t, g[:, None])
    return out


def scale_rows(m: Tensor, s: Tensor) -> Tensor:
    """out[i] = s[i] * m[i] for a (L, d) matrix and an (L,) vector."""
    if m.data.ndim != 2 or s.data.ndim != 1 or m.shape[0] != s.shape[0]:
        raise ShapeMismatchError(f"scale_rows: {m.shape} vs {s.shape}")
    out = Tensor(m.data * s.data[:, None], (m, s))

    def bw(g):
        _accum(m, g * s.data[:, None])
        _accum(s, (g * m.data).sum(axis=1))

    out._bw = bw
    return out


def place(v: Tensor, slots: Sequence[int], size: int) -> Tensor:
    """Scatter a small vector into chosen slots of a zero vector."""
    if v.data.ndim != 1 or len(slots) != v.shape[0]:
        raise ShapeMismatchError(f"place: {v.shape} into {len(slots)} slots")
    data = np.zeros(size)
    slots = list(slots)
    data[slots] = v.data
    out = Tensor(data, (v,))
    out._bw = lambda g: _accum(v, g[slots])
    return out


def normalize_rows(m: Tensor) -> Tensor:
    """Divide each row by its sum so rows become distributions."""
    if m.data.ndim != 2:
        raise ShapeMismatchError("normalize_rows expects a matrix")
    sums = m.data.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise DegenerateInputError("normalize_rows: non-positive row sum")
    p = m.data / sums
    out = Tensor(p, (m,))

    def bw(g):
        inner = (g * p).sum(axis=1, keepdims=True)
        _accum(m, (g - inner) / sums)

    out._bw = bw
    return out


def normalize_vec(v: Tensor) -> Tensor:
    if v.data.ndim != 1:
        raise ShapeMismatchError("normalize_vec expects a vector")
    s = v.data.sum()
    if s <= 0:
        raise DegenerateInputError("normalize_vec: non-positive sum")
    p = v.data / s
    out = Tensor(p, (v,))

    def bw(g):
        inner = (g * p).sum()
        _accum(v, (g - inner) / s)

    out._bw = bw
    return out


def cross_entropy(p: Tensor, target) -> Tensor:
    """-sum(target * log p) with the log clamped at 1e-12.

    ``p`` must be non-negative; it is renormalized first when its sum strays
    from 1 by more than 1e-9.  ``target`` is a constant distribution (one-hot
    or soft).
    """
    target = np.asarray(target, dtype=np.float64)
    if p.data.ndim != 1 or target.shape != p.shape:
        raise ShapeMismatchError(f"cross_entropy: {p.shape} vs {target.shape}")
    if np.any(p.data < 0):
        raise DegenerateInputError("cross_entropy: negative probability")
    total = p.data.sum()
    if total == 0.0:
        raise DegenerateInputError("cross_entropy: all-zero probability vector")
    if abs(total - 1.0) > 1e-9:
        p = normalize_vec(p)
    return -sum_all(cmul(log_clamped(p), target))


def ce_rows_mean(p: Tensor, targets) -> Tensor:
    """Mean of per-row cross-entropies against constant target rows."""
    targets = np.asarray(targets, dtype=np.float64)
    if p.data.ndim != 2 or targets.shape != p.shape:
        raise ShapeMismatchError(f"ce_rows_mean: {p.shape} vs {targets.shape}")
    if np.any(p.data < 0):
        raise DegenerateInputError("ce_rows_mean: negative probability")
    sums = p.data.sum(axis=1)
    if np.any(sums == 0.0):
        raise DegenerateInputError("ce_rows_mean: all-zero probability row")
    if np.any(np.abs(sums - 1.0) > 1e-9):
        p = normalize_rows(p)
    L = p.shape[0]
    return -sum_all(cmul(log_clamped(p), targets)) / L
