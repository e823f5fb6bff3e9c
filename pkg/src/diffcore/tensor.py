# -*- coding: utf-8 -*-
"""Dense arrays with reverse-mode gradient accumulation.

Every primitive builds a ``DiffArray`` holding its numpy result plus a
closure mapping the upstream gradient onto gradients for its parents.
``backward`` walks the recorded graph in reverse topological order and
accumulates into the ``grad`` of every leaf that requires one.
"""
import threading
from contextlib import contextmanager

import numpy as np

from src.exceptions import NonFiniteError, ShapeError

MASK_FILL = -1e9

_grad_mode = threading.local()


def grad_enabled() -> bool:
    return getattr(_grad_mode, 'enabled', True)


@contextmanager
def no_grad():
    """Build results without recording the graph (per thread)."""
    previous = grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


def _check_finite(op, values):
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f'{op}: non-finite values in result')


class DiffArray:
    """A numpy array that remembers how it was computed.

    :values: the data, always a floating dtype
    :requires_grad: whether gradients flow into this array
    """

    # make numpy defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, values, requires_grad=False, dtype=None, name=None):
        values = np.array(values, dtype=dtype, copy=True)
        if not np.issubdtype(values.dtype, np.floating):
            values = values.astype(np.float64)
        _check_finite('DiffArray', values)
        self.values = values
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._grad = None
        self._parents = ()
        self._backward = None
        self._op = 'leaf'

    @property
    def grad(self):
        if self._grad is None:
            self._grad = np.zeros_like(self.values)
        return self._grad

    @grad.setter
    def grad(self, value):
        self._grad = value

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    @property
    def size(self):
        return self.values.size

    @property
    def dtype(self):
        return self.values.dtype

    @property
    def is_leaf(self):
        return not self._parents

    def zero_grad(self):
        self._grad = None

    def numpy(self):
        return self.values

    def item(self):
        return float(self.values)

    def detach(self):
        return DiffArray(self.values)

    def backward(self):
        backward(self)

    def __repr__(self):
        flag = ', requires_grad=True' if self.requires_grad else ''
        return f'DiffArray(shape={self.shape}, dtype={self.dtype}{flag})'

    def __len__(self):
        return len(self.values)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return sqrt(self)

    def abs(self):
        return abs_(self)


def as_array(x, like=None) -> DiffArray:
    """Wrap a constant, matching ``like``'s dtype when given."""
    if isinstance(x, DiffArray):
        return x
    dtype = like.dtype if like is not None else None
    return DiffArray(np.asarray(x, dtype=dtype))


def _lift_pair(a, b):
    if isinstance(a, DiffArray):
        return a, as_array(b, like=a)
    b = as_array(b)
    return as_array(a, like=b), b


def _result(op, values, parents, backward_fn):
    values = np.asarray(values)
    _check_finite(op, values)
    out = DiffArray.__new__(DiffArray)
    out.values = values
    out.name = None
    out._grad = None
    out._op = op
    track = grad_enabled() and any(p.requires_grad for p in parents)
    out.requires_grad = track
    out._parents = tuple(parents) if track else ()
    out._backward = backward_fn if track else None
    return out


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(
            f'{op}: cannot broadcast shapes {a.shape} and {b.shape}'
        ) from None


def _normalize_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


# ---------------------------------------------------------------- arithmetic

def add(a, b) -> DiffArray:
    a, b = _lift_pair(a, b)
    _broadcast_shape('add', a, b)

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _result('add', a.values + b.values, (a, b), backward_fn)


def sub(a, b) -> DiffArray:
    a, b = _lift_pair(a, b)
    _broadcast_shape('sub', a, b)

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return _result('sub', a.values - b.values, (a, b), backward_fn)


def mul(a, b) -> DiffArray:
    a, b = _lift_pair(a, b)
    _broadcast_shape('mul', a, b)

    def backward_fn(g):
        ga = _unbroadcast(g * b.values, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.values, b.shape) if b.requires_grad else None
        return ga, gb
    return _result('mul', a.values * b.values, (a, b), backward_fn)


def div(a, b) -> DiffArray:
    a, b = _lift_pair(a, b)
    _broadcast_shape('div', a, b)
    out = a.values / b.values

    def backward_fn(g):
        ga = _unbroadcast(g / b.values, a.shape) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = _unbroadcast(-g * out / b.values, b.shape)
        return ga, gb
    return _result('div', out, (a, b), backward_fn)


def neg(a) -> DiffArray:
    a = as_array(a)
    return _result('neg', -a.values, (a,), lambda g: (-g,))


def matmul(a, b) -> DiffArray:
    """Batched matrix product with numpy broadcasting of leading axes."""
    a, b = _lift_pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(
            f'matmul: operands need >= 2 dims, got {a.shape} and {b.shape}')
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(
            f'matmul: inner dimensions differ, {a.shape} @ {b.shape}')
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError(
            f'matmul: batch dimensions of {a.shape} and {b.shape} '
            f'do not broadcast') from None

    def backward_fn(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(b.values, -1, -2), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.swapaxes(a.values, -1, -2) @ g, b.shape)
        return ga, gb
    return _result('matmul', a.values @ b.values, (a, b), backward_fn)


# ------------------------------------------------------------- elementwise

def exp(a) -> DiffArray:
    a = as_array(a)
    out = np.exp(a.values)
    return _result('exp', out, (a,), lambda g: (g * out,))


def log(a) -> DiffArray:
    a = as_array(a)
    with np.errstate(divide='ignore', invalid='ignore'):
        out = np.log(a.values)
    return _result('log', out, (a,), lambda g: (g / a.values,))


def sqrt(a) -> DiffArray:
    a = as_array(a)
    with np.errstate(invalid='ignore'):
        out = np.sqrt(a.values)

    def backward_fn(g):
        with np.errstate(divide='ignore'):
            return (g * 0.5 / out,)
    return _result('sqrt', out, (a,), backward_fn)


def abs_(a) -> DiffArray:
    a = as_array(a)
    return _result('abs', np.abs(a.values), (a,),
                   lambda g: (g * np.sign(a.values),))


def tanh(a) -> DiffArray:
    a = as_array(a)
    out = np.tanh(a.values)
    return _result('tanh', out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a) -> DiffArray:
    a = as_array(a)
    out = np.exp(-np.logaddexp(0.0, -a.values)).astype(a.dtype)
    return _result('sigmoid', out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a) -> DiffArray:
    a = as_array(a)
    out = np.maximum(a.values, 0.0)
    return _result('relu', out, (a,), lambda g: (g * (a.values > 0),))


def softplus(a) -> DiffArray:
    a = as_array(a)
    out = np.logaddexp(0.0, a.values).astype(a.dtype)

    def backward_fn(g):
        return (g * np.exp(-np.logaddexp(0.0, -a.values)),)
    return _result('softplus', out, (a,), backward_fn)


def where(condition, a, b) -> DiffArray:
    """Select from ``a`` where the constant ``condition`` holds, else ``b``."""
    a, b = _lift_pair(a, b)
    condition = np.asarray(condition, dtype=bool)
    try:
        shape = np.broadcast_shapes(condition.shape, a.shape, b.shape)
    except ValueError:
        raise ShapeError(
            f'where: cannot broadcast condition {condition.shape} with '
            f'{a.shape} and {b.shape}') from None
    cond = np.broadcast_to(condition, shape)

    def backward_fn(g):
        return (_unbroadcast(np.where(cond, g, 0.0), a.shape),
                _unbroadcast(np.where(cond, 0.0, g), b.shape))
    return _result('where', np.where(cond, a.values, b.values), (a, b),
                   backward_fn)


# --------------------------------------------------------------- reductions

def sum_(a, axis=None, keepdims=False) -> DiffArray:
    a = as_array(a)
    axes = _normalize_axes(axis, a.ndim)
    out = np.sum(a.values, axis=axes, keepdims=keepdims)

    def backward_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape),)
    return _result('sum', out, (a,), backward_fn)


def mean(a, axis=None, keepdims=False) -> DiffArray:
    a = as_array(a)
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return sum_(a, axis=axes, keepdims=keepdims) / float(max(count, 1))


# ------------------------------------------------------------------ shaping

def reshape(a, shape) -> DiffArray:
    a = as_array(a)
    try:
        out = a.values.reshape(shape)
    except ValueError:
        raise ShapeError(
            f'reshape: cannot reshape {a.shape} into {tuple(shape)}'
        ) from None
    return _result('reshape', out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None) -> DiffArray:
    a = as_array(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    if sorted(a_ % a.ndim for a_ in axes) != list(range(a.ndim)):
        raise ShapeError(f'transpose: axes {axes} invalid for {a.shape}')
    inverse = np.argsort([a_ % a.ndim for a_ in axes])
    return _result('transpose', np.transpose(a.values, axes), (a,),
                   lambda g: (np.transpose(g, inverse),))


def swapaxes(a, axis1, axis2) -> DiffArray:
    a = as_array(a)
    axes = list(range(a.ndim))
    axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
    return transpose(a, tuple(axes))


def expand_dims(a, axis) -> DiffArray:
    a = as_array(a)
    return reshape(a, np.expand_dims(a.values, axis).shape)


def broadcast_to(a, shape) -> DiffArray:
    a = as_array(a)
    try:
        out = np.broadcast_to(a.values, shape)
    except ValueError:
        raise ShapeError(
            f'broadcast_to: cannot broadcast {a.shape} to {tuple(shape)}'
        ) from None
    return _result('broadcast_to', out, (a,),
                   lambda g: (_unbroadcast(g, a.shape),))


def concat(arrays, axis=0) -> DiffArray:
    arrays = [as_array(x) for x in arrays]
    if not arrays:
        raise ShapeError('concat: need at least one array')
    ndim = arrays[0].ndim
    axis = axis % ndim
    for x in arrays[1:]:
        same = x.ndim == ndim and all(
            x.shape[i] == arrays[0].shape[i] for i in range(ndim) if i != axis)
        if not same:
            shapes = [y.shape for y in arrays]
            raise ShapeError(
                f'concat: shapes {shapes} differ outside axis {axis}')
    sizes = [x.shape[axis] for x in arrays]
    splits = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        return tuple(np.split(g, splits, axis=axis))
    out = np.concatenate([x.values for x in arrays], axis=axis)
    return _result('concat', out, arrays, backward_fn)


def stack(arrays, axis=0) -> DiffArray:
    return concat([expand_dims(x, axis) for x in arrays], axis=axis)


def getitem(a, index) -> DiffArray:
    a = as_array(a)
    out = a.values[index]

    def backward_fn(g):
        full = np.zeros_like(a.values)
        np.add.at(full, index, g)
        return (full,)
    return _result('getitem', np.array(out), (a,), backward_fn)


# -------------------------------------------------------------- normalizers

def softmax(a, axis=-1) -> DiffArray:
    a = as_array(a)
    shifted = a.values - a.values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)
    return _result('softmax', out, (a,), backward_fn)


def log_softmax(a, axis=-1) -> DiffArray:
    a = as_array(a)
    shifted = a.values - a.values.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward_fn(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)
    return _result('log_softmax', out, (a,), backward_fn)


def layer_norm(a, eps=1e-5) -> DiffArray:
    """Normalize over the last axis; zero-variance rows map to zeros."""
    a = as_array(a)
    mu = a.values.mean(axis=-1, keepdims=True)
    centered = a.values - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = centered * rstd

    def backward_fn(g):
        g_mean = g.mean(axis=-1, keepdims=True)
        gx_mean = (g * xhat).mean(axis=-1, keepdims=True)
        return (rstd * (g - g_mean - xhat * gx_mean),)
    return _result('layer_norm', xhat, (a,), backward_fn)


# ------------------------------------------------------------------ engine

def _topological_order(root):
    order, visited = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack_.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack_.append((parent, False))
    return order


def backward(loss: DiffArray):
    """Accumulate dloss/dleaf into every leaf that requires a gradient."""
    if not isinstance(loss, DiffArray) or loss.ndim != 0:
        shape = getattr(loss, 'shape', None)
        raise ShapeError(f'backward: loss must be a scalar, got shape {shape}')
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.values)}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
