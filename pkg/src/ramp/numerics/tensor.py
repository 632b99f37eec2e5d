"""Minimal dense-tensor reverse-mode autodiff over float64 numpy arrays.

Shapes are explicit: elementwise ops demand identical shapes (python scalars
are the only broadcast), bias addition and row gathering are dedicated ops.
This keeps every edge of the graph auditable.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


class ContractError(ValueError):
    """An operation precondition was violated."""


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _from_op(data: np.ndarray, parents: tuple["Tensor", ...], backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- elementwise ----------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, float)):
            out = Tensor._from_op(self.data + other, (self,),
                                  lambda g, a=self: a._accum(g))
            return out
        if self.shape != other.shape:
            raise ShapeError(f"add: {self.shape} vs {other.shape}")

        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(g)
            if b.requires_grad:
                b._accum(g)
        return Tensor._from_op(self.data + other.data, (self, other), bw)

    __radd__ = __add__

    def __neg__(self):
        return Tensor._from_op(-self.data, (self,),
                               lambda g, a=self: a._accum(-g))

    def __sub__(self, other):
        return self + (-other if isinstance(other, Tensor) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Tensor._from_op(self.data * other, (self,),
                                   lambda g, a=self, c=other: a._accum(g * c))
        if self.shape != other.shape:
            raise ShapeError(f"mul: {self.shape} vs {other.shape}")

        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(g * b.data)
            if b.requires_grad:
                b._accum(g * a.data)
        return Tensor._from_op(self.data * other.data, (self, other), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, (int, float)):
            raise ShapeError("division only by python scalars")
        return self * (1.0 / other)

    def square(self):
        return Tensor._from_op(self.data ** 2, (self,),
                               lambda g, a=self: a._accum(2.0 * a.data * g))

    def exp(self):
        out_data = np.exp(self.data)
        return Tensor._from_op(out_data, (self,),
                               lambda g, a=self, o=out_data: a._accum(g * o))

    def log(self):
        return Tensor._from_op(np.log(self.data), (self,),
                               lambda g, a=self: a._accum(g / a.data))

    def relu(self):
        mask = self.data > 0
        return Tensor._from_op(np.where(mask, self.data, 0.0), (self,),
                               lambda g, a=self, m=mask: a._accum(g * m))

    def tanh(self):
        out_data = np.tanh(self.data)
        return Tensor._from_op(out_data, (self,),
                               lambda g, a=self, o=out_data: a._accum(g * (1.0 - o ** 2)))

    # -- reductions -----------------------------------------------------------

    def sum(self):
        def bw(g, a=self):
            a._accum(np.full_like(a.data, float(g)))
        return Tensor._from_op(np.asarray(self.data.sum()), (self,), bw)

    def mean(self):
        n = self.data.size
        def bw(g, a=self, n=n):
            a._accum(np.full_like(a.data, float(g) / n))
        return Tensor._from_op(np.asarray(self.data.mean()), (self,), bw)

    # -- structure ------------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        return Tensor._from_op(self.data.reshape(shape), (self,),
                               lambda g, a=self, s=old: a._accum(g.reshape(s)))

    def permute(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = np.argsort(axes)
        return Tensor._from_op(np.transpose(self.data, axes), (self,),
                               lambda g, a=self, i=tuple(inv): a._accum(np.transpose(g, i)))

    def matmul(self, other: "Tensor") -> "Tensor":
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ShapeError(f"matmul expects 2-D operands, got {self.shape} and {other.shape}")
        if self.shape[1] != other.shape[0]:
            raise ShapeError(f"matmul: inner extents differ, {self.shape} x {other.shape}")

        # einsum (unoptimized) accumulates the inner sum sequentially in C:
        # bitwise deterministic regardless of BLAS thread count.
        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(np.einsum("ij,kj->ik", g, b.data))
            if b.requires_grad:
                b._accum(np.einsum("ji,jk->ik", a.data, g))
        return Tensor._from_op(np.einsum("ik,kj->ij", self.data, other.data),
                               (self, other), bw)

    __matmul__ = matmul

    def add_bias(self, bias: "Tensor") -> "Tensor":
        if bias.data.ndim != 1 or bias.shape[0] != self.shape[-1]:
            raise ShapeError(f"add_bias: {self.shape} with bias {bias.shape}")

        def bw(g, a=self, b=bias):
            if a.requires_grad:
                a._accum(g)
            if b.requires_grad:
                b._accum(g.reshape(-1, g.shape[-1]).sum(axis=0))
        return Tensor._from_op(self.data + bias.data, (self, bias), bw)

    def index_rows(self, idx) -> "Tensor":
        """Gather rows of a 2-D tensor; gradients scatter-add back."""
        if self.data.ndim != 2:
            raise ShapeError("index_rows expects a 2-D tensor")
        idx = np.asarray(idx, dtype=np.int64)

        def bw(g, a=self, i=idx):
            acc = np.zeros_like(a.data)
            np.add.at(acc, i, g)
            a._accum(acc)
        return Tensor._from_op(self.data[idx], (self,), bw)

    # -- autodiff driver ------------------------------------------------------

    def backward(self) -> None:
        if self.data.size != 1:
            raise ContractError(f"backward() requires a scalar loss, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self._accum(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ContractError("concat of empty list")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g, ts=tensors, off=offsets, ax=axis):
        for t, lo, hi in zip(ts, off[:-1], off[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[ax] = slice(lo, hi)
                t._accum(g[tuple(sl)])
    return Tensor._from_op(data, tuple(tensors), bw)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis with learnable scale and shift."""
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ShapeError(f"layer_norm: params {gamma.shape}/{beta.shape} for input {x.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out_data = xhat * gamma.data + beta.data

    def bw(g, a=x, gm=gamma, bt=beta, xh=xhat, iv=inv):
        if gm.requires_grad:
            gm._accum((g * xh).reshape(-1, xh.shape[-1]).sum(axis=0))
        if bt.requires_grad:
            bt._accum(g.reshape(-1, g.shape[-1]).sum(axis=0))
        if a.requires_grad:
            dxhat = g * gm.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xh).mean(axis=-1, keepdims=True)
            a._accum(iv * (dxhat - m1 - xh * m2))
    return Tensor._from_op(out_data, (x, gamma, beta), bw)


def mse(pred: Tensor, target: np.ndarray | Tensor) -> Tensor:
    t = target if isinstance(target, Tensor) else Tensor(target)
    return (pred - t).square().mean()


def grad_check(fn, params: list[Tensor], h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``fn`` rebuilds and returns the scalar loss from the current param data.
    """
    for p in params:
        p.zero_grad()
    loss = fn()
    loss.backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
                for p in params]
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = fn().item()
            flat[i] = orig - h
            lo = fn().item()
            flat[i] = orig
            num = (hi - lo) / (2 * h)
            denom = max(abs(num), abs(gflat[i]), 1e-8)
            worst = max(worst, abs(num - gflat[i]) / denom)
    return worst
