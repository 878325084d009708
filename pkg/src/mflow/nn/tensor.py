"""Minimal reverse-mode autodiff over float64 numpy arrays.

A `Tensor` wraps a contiguous float64 array plus an optional gradient
buffer of the same shape. Operations build a computation graph of
closures; `Tensor.backward()` runs the graph in reverse topological
order. The op set is exactly what the networks here need: affine maps,
SiLU, concatenation, max-pooling over a set axis, and mean/sum
reductions. Everything is deterministic given the inputs.
"""

import numpy as np

__all__ = ["Tensor", "concat", "GraphError"]


class GraphError(RuntimeError):
    """Backward called without a forward graph to traverse."""


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    @staticmethod
    def _result(data, parents, backward):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def _accumulate(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    # ---- graph construction ------------------------------------------------

    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out_data = self.data + other.data

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        return Tensor._result(out_data, (self, other), backward)

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out_data = self.data * other.data

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        return Tensor._result(out_data, (self, other), backward)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self + (-other)

    def matmul(self, weight: "Tensor") -> "Tensor":
        """`self` of shape (..., in) times a 2-D `weight` (in, out)."""
        if weight.data.ndim != 2:
            raise ValueError("matmul weight must be 2-D")
        if self.data.shape[-1] != weight.data.shape[0]:
            raise ValueError(
                f"matmul dim mismatch: {self.data.shape} @ {weight.data.shape}"
            )
        out_data = self.data @ weight.data

        def backward(g):
            if self.requires_grad:
                self._accumulate(g @ weight.data.T)
            if weight.requires_grad:
                x2 = self.data.reshape(-1, self.data.shape[-1])
                g2 = g.reshape(-1, g.shape[-1])
                weight._accumulate(x2.T @ g2)

        return Tensor._result(out_data, (self, weight), backward)

    def silu(self) -> "Tensor":
        sig = 1.0 / (1.0 + np.exp(-self.data))
        out_data = self.data * sig

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * sig * (1.0 + self.data * (1.0 - sig)))

        return Tensor._result(out_data, (self,), backward)

    def max_over(self, axis: int) -> "Tensor":
        """Max-reduce one axis; ties route their gradient to the first hit."""
        idx = np.argmax(self.data, axis=axis)
        out_data = np.take_along_axis(self.data, np.expand_dims(idx, axis), axis=axis)
        out_data = np.squeeze(out_data, axis=axis)

        def backward(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                np.put_along_axis(
                    full, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis
                )
                self._accumulate(full)

        return Tensor._result(out_data, (self,), backward)

    def sum(self) -> "Tensor":
        out_data = np.asarray(self.data.sum())

        def backward(g):
            if self.requires_grad:
                self._accumulate(np.broadcast_to(g, self.data.shape).copy())

        return Tensor._result(out_data, (self,), backward)

    def mean(self) -> "Tensor":
        scale = 1.0 / self.data.size
        out_data = np.asarray(self.data.mean())

        def backward(g):
            if self.requires_grad:
                self._accumulate(np.broadcast_to(g * scale, self.data.shape).copy())

        return Tensor._result(out_data, (self,), backward)

    # ---- execution ----------------------------------------------------------

    def backward(self, grad: np.ndarray | None = None):
        """Reverse-mode pass from this tensor into every reachable leaf."""
        if self._backward is None:
            raise GraphError(
                "tensor has no computation graph; run a forward pass first"
            )
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar tensor")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=np.float64)
            if grad.shape != self.data.shape:
                raise ValueError("seed gradient shape mismatch")

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
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        self.grad = grad.copy()
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along `axis`; gradient splits back to the parts."""
    datas = [t.data for t in tensors]
    out_data = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        pieces = np.split(g, offsets[1:-1], axis=axis)
        for t, piece in zip(tensors, pieces):
            if t.requires_grad:
                t._accumulate(piece)

    return Tensor._result(out_data, tuple(tensors), backward)
