"""Reverse-mode differentiation over numpy arrays.

Every operation returns a :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients. :func:`backward`
walks the recorded graph in reverse topological order. Everything runs in
float64.
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit


class StaleGradientError(RuntimeError):
    """Raised when an optimizer step is attempted without a fresh backward pass."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple = (),
        _backward: Optional[Callable] = None,
        name: Optional[str] = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self):
        return tsum(self)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)

    def backward(self) -> None:
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents: Sequence[Tensor], backward_fn) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, tuple(parents), backward_fn)
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
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
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor, store: Optional["ParamStore"] = None) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

    ``loss`` must be a scalar. With a ``store`` its gradients are reset to
    zero first, so parameters the loss does not depend on end up with zero
    gradient, and the store is marked ready for :func:`sgd_step`.
    """
    if loss is None:
        raise RuntimeError("backward called without a recorded forward pass")
    if not isinstance(loss, Tensor):
        raise TypeError("backward expects the Tensor returned by a forward pass")
    if loss.data.size != 1:
        raise ValueError(f"loss must be a scalar, got shape {loss.shape}")
    if store is not None:
        store.zero_grad()
    if loss.requires_grad:
        grads = {id(loss): np.ones_like(loss.data)}
        for node in reversed(_topological(loss)):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pg = _unbroadcast(pg, parent.shape)
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg
    if store is not None:
        store._fresh = True


# ----------------------------------------------------------------- ops


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def tsum(a) -> Tensor:
    a = as_tensor(a)
    return _result(a.data.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a) -> Tensor:
    a = as_tensor(a)
    n = a.data.size
    return _result(a.data.mean(), (a,), lambda g: (np.full(a.shape, g / n),))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def getitem(a, index) -> Tensor:
    a = as_tensor(a)

    def back(g):
        out = np.zeros_like(a.data)
        np.add.at(out, index, g)
        return (out,)

    return _result(a.data[index], (a,), back)


def concat(tensors: Iterable, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def back(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(data, tensors, back)


def relu(a) -> Tensor:
    a = as_tensor(a)
    on = a.data > 0
    return _result(np.where(on, a.data, 0.0), (a,), lambda g: (g * on,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    y = expit(a.data)
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),))


def softplus(a) -> Tensor:
    """``log(1 + exp(a))`` without overflow for large ``|a|``."""
    a = as_tensor(a)
    x = a.data
    y = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return _result(y, (a,), lambda g: (g * expit(x),))


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight.T + bias`` over the last axis; ``weight`` is ``(out, in)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    y = x.data @ weight.data.T
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        y = y + bias.data
        parents.append(bias)

    def back(g):
        g2 = g.reshape(-1, g.shape[-1])
        x2 = x.data.reshape(-1, x.shape[-1])
        grads = [g @ weight.data, g2.T @ x2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    return _result(y, parents, back)


def conv1d(x, kernels, bias=None) -> Tensor:
    """Valid, stride-1 cross-correlation along axis 1.

    ``x`` is ``(B, m, c_in)``, ``kernels`` is ``(c_out, c_in, k)``; the
    result is ``(B, m - k + 1, c_out)``.
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    b_, m, c_in = x.shape
    c_out, c_in_k, k = kernels.shape
    if c_in_k != c_in:
        raise ValueError(f"kernel expects {c_in_k} input channels, input has {c_in}")
    if m < k:
        raise ValueError(f"input length {m} shorter than kernel size {k}")
    length = m - k + 1
    cols = sliding_window_view(x.data, k, axis=1).reshape(b_ * length, c_in * k)
    w2 = kernels.data.reshape(c_out, c_in * k)
    y = (cols @ w2.T).reshape(b_, length, c_out)
    parents = [x, kernels]
    if bias is not None:
        bias = as_tensor(bias)
        y = y + bias.data
        parents.append(bias)

    def back(g):
        g2 = g.reshape(b_ * length, c_out)
        gw = (g2.T @ cols).reshape(kernels.shape)
        gcols = (g2 @ w2).reshape(b_, length, c_in, k)
        gx = np.zeros_like(x.data)
        for j in range(k):
            gx[:, j : j + length, :] += gcols[:, :, :, j]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    return _result(y, parents, back)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy(logits, targets) -> Tensor:
    """Mean of ``-log softmax(logits)[target]`` over a ``(B, K)`` batch."""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    b_, k = logits.shape
    if targets.shape != (b_,):
        raise ValueError("one target per row expected")
    if np.any(targets < 0) or np.any(targets >= k):
        raise ValueError(f"target class out of range [0, {k})")
    logp = log_softmax(logits.data)
    rows = np.arange(b_)
    loss = -logp[rows, targets].mean()

    def back(g):
        p = np.exp(logp)
        p[rows, targets] -= 1.0
        return (g * p / b_,)

    return _result(loss, (logits,), back)


# ------------------------------------------------------------ parameters


def glorot_bound(shape: tuple) -> float:
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    else:
        receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
        fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


class ParamStore:
    """Named trainable tensors, their momentum buffers and the init seed.

    Parameters are initialized in creation order from one
    ``default_rng(seed)`` stream, so the same sequence of :meth:`create`
    calls always reproduces the same values.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()
        self.velocity: dict[str, np.ndarray] = {}
        self._fresh = False

    def create(self, name: str, shape: tuple, init: str = "glorot") -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter name {name!r}")
        shape = tuple(int(s) for s in shape)
        if init == "glorot":
            bound = glorot_bound(shape)
            data = self._rng.uniform(-bound, bound, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        p = Tensor(data, requires_grad=True, name=name)
        p.grad = np.zeros(shape)
        self.params[name] = p
        self.velocity[name] = np.zeros(shape)
        return p

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __iter__(self):
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def items(self):
        return self.params.items()

    @property
    def num_values(self) -> int:
        return sum(p.data.size for p in self.params.values())

    @property
    def grads(self) -> dict[str, np.ndarray]:
        return {n: p.grad for n, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = np.zeros_like(p.data)
        self._fresh = False

    def state(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((n, p.data.copy()) for n, p in self.params.items())

    def load_state(self, state: dict) -> None:
        for name, p in self.params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(f"{name}: shape {value.shape} != {p.shape}")
            p.data = value.copy()

    def flat(self) -> np.ndarray:
        return np.concatenate([p.data.ravel() for p in self.params.values()])

    def flat_grad(self) -> np.ndarray:
        return np.concatenate([p.grad.ravel() for p in self.params.values()])

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(np.sum(p.grad**2) for p in self.params.values())))


def sgd_step(store: ParamStore, learning_rate: float, momentum: float = 0.9) -> ParamStore:
    """Momentum SGD: ``v = momentum*v + grad; p -= lr*v``, then zero gradients."""
    if not store._fresh:
        raise StaleGradientError("no backward pass since the last optimizer step")
    for name, p in store.params.items():
        v = momentum * store.velocity[name] + p.grad
        store.velocity[name] = v
        p.data = p.data - learning_rate * v
    store.zero_grad()
    return store
