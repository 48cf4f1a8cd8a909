"""Dense float64 tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a numpy array. Operations on tensors build an implicit
acyclic graph: each result remembers its parents and a closure that routes
the output gradient back to them. ``backward()`` on a scalar walks that
graph once, in exact reverse topological order, filling ``.grad`` on every
tensor that requires a gradient. Calling ``backward()`` a second time on
the same root is an error; build a fresh graph per step.

Conventions:
- everything is float64, row-major;
- any non-finite value produced by an op raises ``NonFiniteError``;
- elementwise ops broadcast only over *leading* dimensions (a shape may be
  left-padded with 1s, and literal leading 1s stretch). Anything else —
  e.g. ``[B,1]`` against ``[B,F]`` — is a shape error, on purpose.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "NonFiniteError",
    "ShapeError",
    "concat",
    "mse_loss",
    "gradcheck",
]


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf."""


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr


def _check_finite(arr: np.ndarray, op: str) -> None:
    # min/max propagate NaN and expose ±inf: two alloc-free reductions
    if arr.size and not (np.isfinite(arr.min()) and np.isfinite(arr.max())):
        raise NonFiniteError(f"non-finite values produced by '{op}'")


def _strip_leading_ones(shape: tuple) -> tuple:
    i = 0
    while i < len(shape) and shape[i] == 1:
        i += 1
    return shape[i:]


def _broadcast_shapes(sa: tuple, sb: tuple) -> tuple:
    """Output shape under the leading-1 broadcast rule, or raise.

    After stripping leading 1s, the shorter shape must be a suffix of the
    longer one; only the leading axes of the longer operand stretch.
    """
    ca, cb = _strip_leading_ones(sa), _strip_leading_ones(sb)
    if len(ca) > len(cb):
        ca, cb = cb, ca
    if ca != cb[len(cb) - len(ca):]:
        raise ShapeError(
            f"shapes {sa} and {sb} differ beyond leading dimensions; "
            "only leading-1 broadcasting is supported"
        )
    nd = max(len(sa), len(sb))
    pa = (1,) * (nd - len(sa)) + sa
    pb = (1,) * (nd - len(sb)) + sb
    return tuple(max(pa[i], pb[i]) for i in range(nd))


def _reduce_to_shape(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    for i, s in enumerate(shape):
        if grad.shape[i] != s:  # s == 1 here
            grad = grad.sum(axis=i, keepdims=True)
    return grad


class Tensor:
    """A float64 array that can participate in reverse-mode differentiation."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fn", "_done")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        _check_finite(self.data, "tensor")
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn = None
        self._done = False

    # -- construction helpers -------------------------------------------

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple["Tensor", ...], grad_fn, op: str) -> "Tensor":
        _check_finite(data, op)
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out._done = False
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._grad_fn = grad_fn
        else:
            out.requires_grad = False
            out._parents = ()
            out._grad_fn = None
        return out

    # -- basic protocol ---------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    # -- autodiff ----------------------------------------------------------

    def backward(self) -> None:
        """Fill ``.grad`` of every reachable tensor that requires one.

        The root must be scalar. Visits nodes in exact reverse topological
        order. A second call on the same root raises.
        """
        if self.size != 1:
            raise ShapeError(f"backward root must be scalar, got shape {self.shape}")
        if not self.requires_grad:
            raise RuntimeError("backward on a tensor that does not require grad")
        if self._done:
            raise RuntimeError("backward called twice on the same graph; rebuild the graph")

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
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._grad_fn is None or node.grad is None:
                continue
            node._grad_fn(node.grad)
        self._done = True

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    # -- elementwise arithmetic -------------------------------------------

    def _coerce(self, other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other):
        other = self._coerce(other)
        _broadcast_shapes(self.shape, other.shape)
        with np.errstate(over="ignore", invalid="ignore"):
            out_data = self.data + other.data

        def grad_fn(g, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_reduce_to_shape(g, a.shape))
            if b.requires_grad:
                b._accumulate(_reduce_to_shape(g, b.shape))

        return Tensor._from_op(out_data, (self, other), grad_fn, "add")

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        _broadcast_shapes(self.shape, other.shape)
        with np.errstate(over="ignore", invalid="ignore"):
            out_data = self.data - other.data

        def grad_fn(g, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_reduce_to_shape(g, a.shape))
            if b.requires_grad:
                b._accumulate(_reduce_to_shape(-g, b.shape))

        return Tensor._from_op(out_data, (self, other), grad_fn, "sub")

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        other = self._coerce(other)
        _broadcast_shapes(self.shape, other.shape)
        with np.errstate(over="ignore", invalid="ignore"):
            out_data = self.data * other.data

        def grad_fn(g, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_reduce_to_shape(g * b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_reduce_to_shape(g * a.data, b.shape))

        return Tensor._from_op(out_data, (self, other), grad_fn, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        _broadcast_shapes(self.shape, other.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            out_data = self.data / other.data

        def grad_fn(g, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_reduce_to_shape(g / b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_reduce_to_shape(-g * a.data / (b.data * b.data), b.shape))

        return Tensor._from_op(out_data, (self, other), grad_fn, "div")

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    def __neg__(self):
        def grad_fn(g, a=self):
            a._accumulate(-g)

        return Tensor._from_op(-self.data, (self,), grad_fn, "neg")

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")
        with np.errstate(over="ignore", invalid="ignore"):
            out_data = self.data ** exponent

        def grad_fn(g, a=self, p=exponent):
            a._accumulate(g * p * a.data ** (p - 1))

        return Tensor._from_op(out_data, (self,), grad_fn, "pow")

    # -- matmul ------------------------------------------------------------

    def __matmul__(self, other):
        other = self._coerce(other)
        a, b = self.data, other.data
        if a.ndim < 2 or b.ndim < 2:
            raise ShapeError("matmul operands must be at least 2-D")
        if a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"matmul inner dims disagree: {a.shape} @ {b.shape}")
        if a.ndim > 2 and b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
            raise ShapeError(f"matmul batch dims disagree: {a.shape} @ {b.shape}")
        with np.errstate(over="ignore", invalid="ignore"):
            out_data = a @ b

        def grad_fn(g, ta=self, tb=other):
            if ta.requires_grad:
                ga = g @ np.swapaxes(tb.data, -1, -2)
                ta._accumulate(_reduce_to_shape(ga, ta.shape))
            if tb.requires_grad:
                gb = np.swapaxes(ta.data, -1, -2) @ g
                tb._accumulate(_reduce_to_shape(gb, tb.shape))

        return Tensor._from_op(out_data, (self, other), grad_fn, "matmul")

    # -- nonlinearities ------------------------------------------------------

    def relu(self):
        out_data = np.maximum(self.data, 0.0)

        def grad_fn(g, a=self):
            a._accumulate(g * (a.data > 0))

        return Tensor._from_op(out_data, (self,), grad_fn, "relu")

    def sigmoid(self):
        out_data = 1.0 / (1.0 + np.exp(-self.data))

        def grad_fn(g, a=self, y=out_data):
            a._accumulate(g * y * (1.0 - y))

        return Tensor._from_op(out_data, (self,), grad_fn, "sigmoid")

    def tanh(self):
        out_data = np.tanh(self.data)

        def grad_fn(g, a=self, y=out_data):
            a._accumulate(g * (1.0 - y * y))

        return Tensor._from_op(out_data, (self,), grad_fn, "tanh")

    def exp(self):
        with np.errstate(over="ignore"):
            out_data = np.exp(self.data)

        def grad_fn(g, a=self, y=out_data):
            a._accumulate(g * y)

        return Tensor._from_op(out_data, (self,), grad_fn, "exp")

    def sqrt(self):
        out_data = np.sqrt(self.data)

        def grad_fn(g, a=self, y=out_data):
            a._accumulate(g * 0.5 / y)

        return Tensor._from_op(out_data, (self,), grad_fn, "sqrt")

    def softmax(self, axis: int = -1):
        """Numerically stable softmax along ``axis``; outputs sum to 1."""
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out_data = e / e.sum(axis=axis, keepdims=True)

        def grad_fn(g, a=self, y=out_data, ax=axis):
            dot = (g * y).sum(axis=ax, keepdims=True)
            a._accumulate(y * (g - dot))

        return Tensor._from_op(out_data, (self,), grad_fn, "softmax")

    # -- reductions ------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def grad_fn(g, a=self, ax=axis, kd=keepdims):
            if ax is None:
                a._accumulate(np.full(a.shape, float(g)))
            else:
                gg = g if kd else np.expand_dims(g, ax)
                a._accumulate(np.broadcast_to(gg, a.shape).copy())

        return Tensor._from_op(np.asarray(out_data), (self,), grad_fn, "sum")

    def mean(self, axis=None, keepdims: bool = False):
        n = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- shape ops ------------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out_data = self.data.reshape(shape)

        def grad_fn(g, a=self):
            a._accumulate(g.reshape(a.shape))

        return Tensor._from_op(out_data, (self,), grad_fn, "reshape")

    def transpose(self, *axes):
        axes = axes or None
        out_data = self.data.transpose(axes) if axes else self.data.transpose()
        perm = axes if axes else tuple(reversed(range(self.ndim)))
        inv = np.argsort(perm)

        def grad_fn(g, a=self, inv=tuple(inv)):
            a._accumulate(np.ascontiguousarray(g.transpose(inv)))

        return Tensor._from_op(out_data.copy(), (self,), grad_fn, "transpose")

    def __getitem__(self, key):
        """Basic indexing only (ints and slices); backward scatters in place."""
        out_data = self.data[key]

        def grad_fn(g, a=self, k=key):
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[k] += g

        return Tensor._from_op(out_data.copy(), (self,), grad_fn, "slice")


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along ``axis``; gradient splits back."""
    if not tensors:
        raise ShapeError("concat of zero tensors")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g, ts=tuple(tensors), offs=offsets, ax=axis):
        index: list = [slice(None)] * g.ndim
        for t, start, stop in zip(ts, offs[:-1], offs[1:]):
            if t.requires_grad:
                index[ax] = slice(int(start), int(stop))
                t._accumulate(g[tuple(index)])

    return Tensor._from_op(out_data, tuple(tensors), grad_fn, "concat")


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared error (1/N)·Σ(pred − target)² as a scalar tensor."""
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss shapes disagree: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ShapeError("mse_loss on empty input")
    diff = pred - target
    return (diff * diff).mean()


def gradcheck(fn, inputs: list[Tensor], h: float = 1e-5,
              rtol: float = 1e-4, atol: float = 1e-7, small: float = 1e-8) -> float:
    """Compare analytic gradients of ``fn(inputs) -> scalar Tensor`` against
    central finite differences.

    Returns the worst observed relative error. Elements where the numeric
    derivative is below ``small`` are compared absolutely against ``atol``.
    Raises AssertionError on failure.
    """
    for t in inputs:
        t.grad = None  # stale gradients would pollute the analytic side
    out = fn()
    out.backward()
    worst = 0.0
    for t in inputs:
        if not t.requires_grad:
            continue
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
        flat = t.data.reshape(-1)
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(fn().data)
            flat[i] = orig - h
            down = float(fn().data)
            flat[i] = orig
            numeric[i] = (up - down) / (2 * h)
        numeric = numeric.reshape(t.shape)
        big = np.abs(numeric) >= small
        if np.any(big):
            rel = np.abs(analytic[big] - numeric[big]) / np.abs(numeric[big])
            worst = max(worst, float(rel.max()))
            assert rel.max() < rtol, (
                f"gradient mismatch: rel err {rel.max():.3e} (rtol {rtol:g})")
        if np.any(~big):
            absd = np.abs(analytic[~big] - numeric[~big])
            assert absd.max() < atol, (
                f"gradient mismatch near zero: abs err {absd.max():.3e} (atol {atol:g})")
    return worst
