"""
Small reverse-mode autodiff tensor on top of numpy.

Every op returns a new immutable ``Tensor``. When any input requires a
gradient the result remembers its parents and a closure mapping the
output gradient to per-input gradients. ``backward`` linearises that
graph into a tape (parents before children) and replays it in reverse.

Only the handful of ops needed by the interaction model are provided:
matmul, softmax, add/sub/mul with trailing-dim broadcasting, sum/mean,
reshape, transpose, tanh and constant powers.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import (
    AxisOutOfRange,
    ElementCountMismatch,
    EmptyTape,
    InvalidPermutation,
    NonFiniteError,
    NonFiniteEvaluation,
    NonScalarRoot,
    ShapeMismatch,
)

DTYPES = {"f32": np.float32, "f64": np.float64}


def _as_dtype(dtype) -> np.dtype:
    if isinstance(dtype, str):
        try:
            return np.dtype(DTYPES[dtype])
        except KeyError:
            raise ValueError(f"unsupported dtype {dtype!r}") from None
    dt = np.dtype(dtype)
    if dt not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dt}")
    return dt


class Tensor:
    """n-dimensional real array that can take part in reverse-mode differentiation.

    Args:
        data: anything ``np.asarray`` accepts.
        requires_grad: mark as a leaf whose gradient ``backward`` should fill.
        dtype: ``"f32"``/``"f64"`` or a numpy float dtype. Defaults to the
            dtype of ``data`` when it is already a float array, else f64.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None, *,
                 _parents: tuple = (), _backward: Callable | None = None, _op: str = ""):
        if dtype is None:
            arr = np.asarray(data)
            dt = arr.dtype if arr.dtype in (np.float32, np.float64) else np.dtype(np.float64)
        else:
            dt = _as_dtype(dtype)
        arr = np.array(data, dtype=dt, copy=True)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"non-finite value in tensor{' from ' + _op if _op else ''}")
        arr.flags.writeable = False
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Tensor | None = None
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    # -- basic properties -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({np.array2string(self.data, precision=4)}{flag})"

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def sum(self, axis=None, keepdim=False):
        return reduce_sum(self, axis, keepdim)

    def mean(self, axis=None, keepdim=False):
        return mean(self, axis, keepdim)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *perm):
        if len(perm) == 1 and isinstance(perm[0], (tuple, list)):
            perm = tuple(perm[0])
        return transpose(self, perm or None)

    @property
    def T(self):
        return swap_last(self)

    def backward(self):
        backward(self)


def tensor(data, requires_grad=False, dtype=None) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data, requires_grad, dtype)


def _wrap(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=like.dtype if like is not None else None)


def _make(data, parents: tuple, backward_fn, op: str) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(data, _op=op)
    return Tensor(data, requires_grad=True, _parents=parents, _backward=backward_fn, _op=op)


def _check_axis(x: Tensor, axis: int) -> int:
    nd = x.ndim
    if not -nd <= axis < nd:
        raise AxisOutOfRange(f"axis {axis} out of range for rank {nd}")
    return axis % nd


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes that broadcasting expanded to reach its shape."""
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    if lead:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(a: tuple, b: tuple) -> tuple:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise ShapeMismatch(f"cannot broadcast {a} with {b}") from None


# -- elementwise ----------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a.shape, b.shape)

    def bw(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a.shape, b.shape)

    def bw(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a.shape, b.shape)

    def bw(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), bw, "mul")


_ELEMENTWISE = {"add": add, "sub": sub, "mul": mul}


def elementwise(a, b, kind: str) -> Tensor:
    """Pointwise ``add``, ``sub`` or ``mul`` with trailing-dimension broadcasting."""
    try:
        fn = _ELEMENTWISE[kind]
    except KeyError:
        raise ValueError(f"unknown elementwise kind {kind!r}") from None
    return fn(a, b)


def _pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, _wrap(b, a)
    b = _wrap(b)
    return _wrap(a, b), b


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def bw(g):
        return (g * (1.0 - y * y),)

    return _make(y, (x,), bw, "tanh")


def power(x: Tensor, p: float) -> Tensor:
    """Elementwise ``x ** p`` for a constant exponent."""
    y = x.data ** p

    def bw(g):
        return (g * p * x.data ** (p - 1),)

    return _make(y, (x,), bw, "power")


# -- linear algebra --------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """Batched matrix product ``a @ b`` with broadcastable leading dimensions."""
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatch(f"matmul needs rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"inner dimensions differ: {a.shape} @ {b.shape}")
    _broadcast_shape(a.shape[:-2], b.shape[:-2])

    def bw(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return _make(a.data @ b.data, (a, b), bw, "matmul")


# -- reductions ---------------------------------------------------------------------

def reduce_sum(x: Tensor, axis=None, keepdim: bool = False) -> Tensor:
    if axis is not None:
        axis = _check_axis(x, axis)
    out = x.data.sum(axis=axis, keepdims=keepdim)

    def bw(g):
        if axis is not None and not keepdim:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(out, (x,), bw, "sum")


def mean(x: Tensor, axis=None, keepdim: bool = False) -> Tensor:
    n = x.size if axis is None else x.shape[_check_axis(x, axis)]
    return mul(reduce_sum(x, axis, keepdim), 1.0 / n)


def _softmax_grad(y: np.ndarray, g: np.ndarray, axis: int) -> np.ndarray:
    return y * (g - (g * y).sum(axis=axis, keepdims=True))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Softmax along ``axis``; the row maximum is subtracted before exponentiating."""
    axis = _check_axis(x, axis)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (_softmax_grad(y, g, axis),)

    return _make(y, (x,), bw, "softmax")


# -- shape ops ------------------------------------------------------------------------

def reshape(x: Tensor, new_shape: Sequence[int]) -> Tensor:
    new_shape = tuple(int(s) for s in new_shape)
    if -1 in new_shape:
        known = int(np.prod([s for s in new_shape if s != -1]))
        if new_shape.count(-1) > 1 or known == 0 or x.size % known:
            raise ElementCountMismatch(f"cannot reshape {x.shape} to {new_shape}")
        new_shape = tuple(x.size // known if s == -1 else s for s in new_shape)
    if int(np.prod(new_shape)) != x.size:
        raise ElementCountMismatch(f"cannot reshape {x.shape} to {new_shape}")
    old = x.shape

    def bw(g):
        return (g.reshape(old),)

    return _make(x.data.reshape(new_shape), (x,), bw, "reshape")


def transpose(x: Tensor, perm: Sequence[int] | None = None) -> Tensor:
    if perm is None:
        perm = tuple(reversed(range(x.ndim)))
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(x.ndim)):
        raise InvalidPermutation(f"{perm} is not a permutation of {x.ndim} axes")
    inv = tuple(np.argsort(perm))

    def bw(g):
        return (g.transpose(inv),)

    return _make(x.data.transpose(perm), (x,), bw, "transpose")


def swap_last(x: Tensor) -> Tensor:
    perm = list(range(x.ndim))
    perm[-1], perm[-2] = perm[-2], perm[-1]
    return transpose(x, perm)


# -- reverse pass ---------------------------------------------------------------------

def build_tape(root: Tensor) -> list[Tensor]:
    """Return the recorded nodes reachable from ``root`` in topological order."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in reversed(node._parents):
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every leaf requiring grad."""
    if root.size != 1:
        raise NonScalarRoot(f"backward needs a scalar root, got shape {root.shape}")
    if root.is_leaf:
        raise EmptyTape("root was not produced by any recorded operation")
    tape = build_tape(root)
    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for node in reversed(tape):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            prev = node.grad.data if node.grad is not None else 0.0
            node.grad = Tensor(prev + g, dtype=node.dtype)
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg


def finite_diff_check(f: Callable, x, eps: float = 1e-5) -> float:
    """Compare reverse-mode gradients of a scalar function with central differences.

    ``f`` receives the tensor(s) and must return a scalar ``Tensor``. ``x``
    may be a single array/Tensor or a sequence of them. Returns the largest
    ``|analytic - numeric| / max(1, |analytic|)`` over every coordinate.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    single = not isinstance(x, (list, tuple))
    arrays = [np.array(t.data if isinstance(t, Tensor) else t, dtype=np.float64)
              for t in ([x] if single else x)]

    def call(arrs, grad=False):
        ts = [Tensor(a, requires_grad=grad) for a in arrs]
        try:
            out = f(ts[0]) if single else f(*ts)
        except NonFiniteError as exc:
            raise NonFiniteEvaluation(str(exc)) from exc
        return ts, out

    leaves, out = call(arrays, grad=True)
    if out.size != 1:
        raise NonScalarRoot("finite_diff_check needs a scalar-valued function")
    if out.is_leaf:
        analytic = [np.zeros_like(a) for a in arrays]
    else:
        backward(out)
        analytic = [t.grad.data if t.grad is not None else np.zeros_like(t.data) for t in leaves]

    worst = 0.0
    for k, base in enumerate(arrays):
        flat = base.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = call(arrays)[1].item()
            flat[i] = orig - eps
            fm = call(arrays)[1].item()
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NonFiniteEvaluation(f"non-finite evaluation at coordinate {i}")
            num = (fp - fm) / (2 * eps)
            a = analytic[k].reshape(-1)[i]
            worst = max(worst, abs(a - num) / max(1.0, abs(a)))
    return worst
