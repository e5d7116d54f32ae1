"""A small reverse-mode differentiation tape over 2-D float64 arrays.

Every ``Tensor`` is a (rows, cols) matrix.  Ops record a closure that pushes the
upstream gradient into their parents; ``Tensor.backward`` walks the graph in
reverse topological order.  Any op producing a non-finite value raises
``NumericError`` immediately.
"""

from __future__ import annotations

import numpy as np

from . import activations as act
from .activations import ActivationParams, Kind


class NumericError(FloatingPointError):
    pass


class StateError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None, requires_grad=False, name=None):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 0:
            data = data.reshape(1, 1)
        elif data.ndim == 1:
            data = data.reshape(1, -1)
        if data.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NumericError(f"non-finite values produced{'' if name is None else ' in ' + name}")
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        g = _unbroadcast(g, self.data.shape)
        self.grad = g.copy() if self.grad is None else self.grad + g

    def backward(self, grad=None) -> None:
        if grad is None:
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=np.float64).reshape(self.data.shape)
        order = _topological(self)
        for node in order:
            if node._backward is not None:
                node.grad = None
        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, name={self.name})"


def _topological(root: Tensor) -> list[Tensor]:
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def parameter(data, name=None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def constant(data) -> Tensor:
    return Tensor(data)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch {a.shape} @ {b.shape}")

    def backward(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    out = Tensor(a.data @ b.data, (a, b), None)
    out._backward = backward
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(g)
        b._accumulate(g)

    out = Tensor(a.data + b.data, (a, b))
    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(g * b.data)
        b._accumulate(g * a.data)

    out = Tensor(a.data * b.data, (a, b))
    out._backward = backward
    return out


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.data.T, (a,))
    out._backward = lambda g: a._accumulate(g.T)
    return out


def adaptive(x: Tensor, kappa: Tensor, lam: Tensor, linear_unit: bool) -> Tensor:
    """APA (``linear_unit=False``) or AGLU with (1, 1) parameter tensors."""
    p = ActivationParams(kappa.item(), lam.item())
    z = x.data
    if linear_unit:
        value = act.aglu_forward(z, p)
        dz, dk, dl = act.aglu_grad_input, act.aglu_grad_kappa, act.aglu_grad_lambda
    else:
        value = act.apa_forward(z, p)
        dz, dk, dl = act.apa_grad_input, act.apa_grad_kappa, act.apa_grad_lambda

    def backward(g):
        x._accumulate(g * dz(z, p))
        kappa._accumulate(np.sum(g * dk(z, p)).reshape(1, 1))
        lam._accumulate(np.sum(g * dl(z, p)).reshape(1, 1))

    out = Tensor(value, (x, kappa, lam))
    out._backward = backward
    return out


def _fixed_derivative(tag: Kind, z: np.ndarray, kappa: float) -> np.ndarray:
    if tag is Kind.IDENTITY:
        return np.ones_like(z)
    if tag is Kind.RELU:
        return (z > 0).astype(np.float64)
    if tag is Kind.SIGMOID:
        s = act.sigmoid(z)
        return s * (1.0 - s)
    if tag is Kind.SILU:
        s = act.sigmoid(z)
        return s * (1.0 + z * (1.0 - s))
    if tag is Kind.GELU:
        s = act.sigmoid(act.GELU_KAPPA * z)
        return s * (1.0 + act.GELU_KAPPA * z * (1.0 - s))
    if tag is Kind.GUMBEL:
        with np.errstate(over="ignore"):
            e = np.exp(-z)
            return np.where(np.isfinite(e), np.exp(-e) * e, 0.0)
    if tag is Kind.MISH:
        t = np.tanh(np.logaddexp(0.0, z))
        return t + z * (1.0 - t * t) * act.sigmoid(z)
    if tag is Kind.PRELU:
        return np.where(z > 0, 1.0, kappa)
    if tag is Kind.ELU:
        return np.where(z > 0, 1.0, kappa * np.exp(np.minimum(z, 0.0)))
    raise ValueError(f"no fixed derivative for {tag}")


def fixed(x: Tensor, kind: act.ActivationKind) -> Tensor:
    """Non-learnable activation (PRELU/ELU use their stored kappa as a constant)."""
    kappa = kind.params.kappa if kind.params is not None else 0.0
    z = x.data
    out = Tensor(act.reference_forward(kind, z), (x,))
    out._backward = lambda g: x._accumulate(g * _fixed_derivative(kind.tag, z, kappa))
    return out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise normalisation followed by a per-feature affine map."""
    mu = x.data.mean(axis=1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=1, keepdims=True) + eps)
    xhat = xc * inv

    def backward(g):
        gain._accumulate(g * xhat)
        bias._accumulate(g)
        gh = g * gain.data
        d = x.data.shape[1]
        x._accumulate(inv * (gh - gh.mean(axis=1, keepdims=True)
                             - xhat * (gh * xhat).sum(axis=1, keepdims=True) / d))

    out = Tensor(xhat * gain.data + bias.data, (x, gain, bias))
    out._backward = backward
    return out


def scale_by_mask(x: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a constant mask (dropout)."""
    out = Tensor(x.data * mask, (x,))
    out._backward = lambda g: x._accumulate(g * mask)
    return out
