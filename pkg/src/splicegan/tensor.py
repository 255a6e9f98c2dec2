"""Dense tensors with reverse-mode automatic differentiation.

The op set is exactly what the networks here need: elementwise arithmetic,
matrix products, leaky ReLU, sigmoid, batch normalization, clamped logs,
reductions and column concatenation. Tensors are immutable values once
created; a backward graph is built implicitly through parent links and is
consumed by a single call to :meth:`Tensor.backward`, which visits every
node exactly once in reverse topological order (each node after all of its
consumers). Kernels never reassociate floating-point reductions, so results
are reproducible bit-for-bit for a fixed seed.

Training runs in float32; ``grad_check`` runs in float64.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateBatchError, DimensionError, NumericError

DEFAULT_DTYPE = np.float32


class Tensor:
    """A node of the backward graph: an ndarray plus provenance.

    ``parents`` and the ``backward`` closure form the operation record; leaf
    tensors have neither. Gradients accumulate in ``grad`` (same shape and
    dtype as ``data``) during :meth:`backward`.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None,
                 name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = tuple(parents)
        self._backward = backward
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"<Tensor shape={self.data.shape} dtype={self.data.dtype}{tag}>"

    # -- operators ---------------------------------------------------------

    def __add__(self, other):
        return add(self, as_tensor(other, self.dtype))

    def __radd__(self, other):
        return add(as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, as_tensor(other, self.dtype))

    def __rsub__(self, other):
        return sub(as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other, self.dtype))

    def __rmul__(self, other):
        return mul(as_tensor(other, self.dtype), self)

    def __truediv__(self, other):
        return div(self, as_tensor(other, self.dtype))

    def __matmul__(self, other):
        return matmul(self, as_tensor(other, self.dtype))

    def __neg__(self):
        return mul(self, as_tensor(-1.0, self.dtype))

    # -- autodiff ----------------------------------------------------------

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar root."""
        if self.data.size != 1:
            raise DimensionError(
                f"backward requires a scalar root, got shape {self.data.shape}")
        order = topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    def _accumulate(self, g: np.ndarray) -> None:
        if g.dtype != self.data.dtype:
            g = g.astype(self.data.dtype)
        if self.grad is None:
            # Grads are never mutated in place, so aliasing is safe; only
            # materialize read-only broadcast views.
            self.grad = g if g.flags.owndata or g.flags.writeable else g.copy()
        else:
            self.grad = self.grad + g


def topo_order(root: Tensor) -> list[Tensor]:
    """Topological order of the graph reachable from ``root`` (parents first).

    Iterative DFS; each node appears exactly once, so the reversed order
    visits every node after all of its consumers.
    """
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited and p.requires_grad:
                stack.append((p, False))
    return order


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value, dtype=dtype if dtype is not None else DEFAULT_DTYPE)
    return Tensor(arr)


def assert_finite(t: Tensor, what: str = "tensor") -> Tensor:
    """NaN/Inf anywhere is an error state, not a value to propagate."""
    if not np.isfinite(t.data).all():
        raise NumericError(f"non-finite values in {what}")
    return t


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over the axes that broadcasting expanded."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _binary(a: Tensor, b: Tensor, out_data: np.ndarray,
            da: Callable[[np.ndarray], np.ndarray],
            db: Callable[[np.ndarray], np.ndarray]) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(da(g), a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(db(g), b.data.shape))

    return Tensor(out_data, parents=(a, b), backward=backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data + b.data, lambda g: g, lambda g: g)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data - b.data, lambda g: g, lambda g: -g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data * b.data, lambda g: g * b.data, lambda g: g * a.data)


def div(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data / b.data,
                   lambda g: g / b.data,
                   lambda g: -g * a.data / (b.data * b.data))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul shapes do not conform: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return Tensor(out, parents=(a, b), backward=backward)


def mean(t: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out = t.data.mean(axis=axis, keepdims=keepdims)
    count = t.data.size if axis is None else t.data.shape[axis]
    inv = t.data.dtype.type(1.0 / count)

    def backward(g):
        if not t.requires_grad:
            return
        if axis is None:
            t._accumulate(np.broadcast_to(g * inv, t.data.shape))
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            t._accumulate(np.broadcast_to(gg * inv, t.data.shape))

    return Tensor(out, parents=(t,), backward=backward)


def sum_(t: Tensor) -> Tensor:
    out = t.data.sum()

    def backward(g):
        if t.requires_grad:
            t._accumulate(np.broadcast_to(g, t.data.shape))

    return Tensor(out, parents=(t,), backward=backward)


def absolute(t: Tensor) -> Tensor:
    out = np.abs(t.data)

    def backward(g):
        if t.requires_grad:
            t._accumulate(g * np.sign(t.data))

    return Tensor(out, parents=(t,), backward=backward)


def sqrt(t: Tensor) -> Tensor:
    out = np.sqrt(t.data)

    def backward(g):
        if t.requires_grad:
            t._accumulate(g * (t.data.dtype.type(0.5) / out))

    return Tensor(out, parents=(t,), backward=backward)


def log(t: Tensor) -> Tensor:
    out = np.log(t.data)

    def backward(g):
        if t.requires_grad:
            t._accumulate(g / t.data)

    return Tensor(out, parents=(t,), backward=backward)


def clamp_min(t: Tensor, floor: float) -> Tensor:
    """max(t, floor); gradient passes where the input was not clamped."""
    f = t.data.dtype.type(floor)
    out = np.maximum(t.data, f)

    def backward(g):
        if t.requires_grad:
            t._accumulate(g * (t.data >= f))

    return Tensor(out, parents=(t,), backward=backward)


def sigmoid(t: Tensor) -> Tensor:
    x = t.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        if t.requires_grad:
            t._accumulate(g * out * (1.0 - out))

    return Tensor(out, parents=(t,), backward=backward)


def leaky_relu(t: Tensor, slope: float = 0.2) -> Tensor:
    """Elementwise max(x, slope*x); slope must lie in (0, 1)."""
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must be in (0, 1), got {slope}")
    out = kernels.leaky_relu_forward(t.data, slope)

    def backward(g):
        if t.requires_grad:
            t._accumulate(kernels.leaky_relu_backward(t.data, g, slope))

    return Tensor(out, parents=(t,), backward=backward)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack 2-D tensors along the batch axis."""
    datas = [p.data for p in parts]
    if any(d.ndim != 2 for d in datas):
        raise DimensionError("concat_rows expects 2-D tensors")
    out = np.concatenate(datas, axis=0)
    heights = [d.shape[0] for d in datas]

    def backward(g):
        start = 0
        for p, h in zip(parts, heights):
            if p.requires_grad:
                p._accumulate(g[start:start + h])
            start += h

    return Tensor(out, parents=tuple(parts), backward=backward)


def slice_rows(t: Tensor, start: int, stop: int) -> Tensor:
    """Rows [start, stop) of a 2-D tensor."""
    out = t.data[start:stop]

    def backward(g):
        if t.requires_grad:
            full = np.zeros_like(t.data)
            full[start:stop] = g
            t._accumulate(full)

    return Tensor(out, parents=(t,), backward=backward)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate 2-D tensors along columns."""
    datas = [p.data for p in parts]
    if any(d.ndim != 2 for d in datas):
        raise DimensionError("concat_cols expects 2-D tensors")
    out = np.concatenate(datas, axis=1)
    widths = [d.shape[1] for d in datas]

    def backward(g):
        start = 0
        for p, w in zip(parts, widths):
            if p.requires_grad:
                p._accumulate(g[:, start:start + w])
            start += w

    return Tensor(out, parents=tuple(parts), backward=backward)


def reshape(t: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = t.data.reshape(shape)

    def backward(g):
        if t.requires_grad:
            t._accumulate(g.reshape(t.data.shape))

    return Tensor(out, parents=(t,), backward=backward)


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map y = xW + b. A 1-D x is treated as a single row."""
    squeeze = x.data.ndim == 1
    x2 = reshape(x, (1, -1)) if squeeze else x
    if x2.data.ndim != 2 or w.data.ndim != 2:
        raise DimensionError(
            f"dense expects 2-D operands, got x {x.data.shape}, w {w.data.shape}")
    if x2.data.shape[1] != w.data.shape[0]:
        raise DimensionError(
            f"dense shapes do not conform: x {x.data.shape} with w {w.data.shape}")
    y = add(matmul(x2, w), b)
    return reshape(y, (-1,)) if squeeze else y


class BatchNormState:
    """Running per-feature statistics for evaluation-mode normalization."""

    def __init__(self, num_features: int, dtype=DEFAULT_DTYPE):
        self.mean = np.zeros(num_features, dtype=dtype)
        self.var = np.ones(num_features, dtype=dtype)

    def update(self, batch_mean: np.ndarray, batch_var: np.ndarray, momentum: float):
        m = self.mean.dtype.type(momentum)
        om = self.mean.dtype.type(1.0 - momentum)
        self.mean = m * self.mean + om * batch_mean.astype(self.mean.dtype)
        self.var = m * self.var + om * batch_var.astype(self.var.dtype)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, mode: str,
               state: BatchNormState, eps: float = 1e-5,
               momentum: float = 0.9) -> Tensor:
    """Per-feature normalization over the batch axis.

    Train mode normalizes with the batch statistics (variance floored by
    ``eps``) and folds them into the running statistics; eval mode uses the
    running statistics. A train-mode batch of one row cannot be normalized.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"batch_norm mode must be 'train' or 'eval', got {mode!r}")
    if x.data.ndim != 2:
        raise DimensionError(f"batch_norm expects a 2-D batch, got {x.data.shape}")
    if mode == "train":
        if x.data.shape[0] < 2:
            raise DegenerateBatchError(
                f"cannot normalize a training batch of {x.data.shape[0]} row(s)")
        mu = mean(x, axis=0, keepdims=True)
        xc = sub(x, mu)
        var = mean(mul(xc, xc), axis=0, keepdims=True)
        xhat = div(xc, sqrt(add(var, as_tensor(eps, x.dtype))))
        state.update(mu.data.ravel(), var.data.ravel(), momentum)
    else:
        rm = Tensor(state.mean.reshape(1, -1).astype(x.data.dtype))
        denom = np.sqrt(state.var + state.var.dtype.type(eps))
        rd = Tensor(denom.reshape(1, -1).astype(x.data.dtype))
        xhat = div(sub(x, rm), rd)
    return add(mul(xhat, gamma), beta)


def grad_check(f: Callable[[Tensor], Tensor], x, eps: float = 1e-5,
               max_coords: int | None = None, seed: int = 0) -> float:
    """Max relative error between autodiff and central finite differences.

    ``f`` must map a tensor to a scalar tensor and be deterministic. The
    check runs in float64. When ``max_coords`` is given, that many
    coordinates are sampled (seeded) instead of sweeping all of them.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x0 = np.asarray(x, dtype=np.float64)
    xt = Tensor(x0.copy(), requires_grad=True)
    y = f(xt)
    y.backward()
    g = xt.grad if xt.grad is not None else np.zeros_like(x0)

    flat = x0.ravel()
    coords = np.arange(flat.size)
    if max_coords is not None and max_coords < flat.size:
        rng = np.random.default_rng(seed)
        coords = rng.choice(flat.size, size=max_coords, replace=False)

    gflat = g.ravel()
    worst = 0.0
    for c in coords:
        h = eps * max(1.0, abs(flat[c]))
        xp = flat.copy()
        xp[c] += h
        xm = flat.copy()
        xm[c] -= h
        fp = f(Tensor(xp.reshape(x0.shape))).item()
        fm = f(Tensor(xm.reshape(x0.shape))).item()
        fd = (fp - fm) / (2.0 * h)
        denom = max(abs(fd), abs(gflat[c]), 1e-8)
        worst = max(worst, abs(fd - gflat[c]) / denom)
    return worst
