"""Reverse-mode automatic differentiation over dense numpy arrays.

Small by design: exactly the operations the encoder/decoder stack needs, a
tape-free graph built through closures, and an Adam optimizer. Arrays default
to float32; tests that compare against finite differences switch the module to
float64 via set_dtype().
"""

from __future__ import annotations

import json
import math

import numpy as np

_DTYPE = np.float32
_GRAD_ENABLED = True

GELU_C = math.sqrt(2.0 / math.pi)
GELU_A = 0.044715


def set_dtype(dtype):
    """Switch the arithmetic dtype (np.float32 or np.float64)."""
    global _DTYPE
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be np.float32 or np.float64")
    _DTYPE = dtype


def get_dtype():
    return _DTYPE


class no_grad:
    """Context manager disabling graph construction (inference mode)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._saved = _GRAD_ENABLED
        _GRAD_ENABLED = False

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._saved
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=_DTYPE)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    def item(self) -> float:
        return self.data.item()

    def __repr__(self):
        return f"Tensor{self.shape}"

    # operator sugar; constants get wrapped on the fly
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __neg__(self):
        return mul(self, _wrap(-1.0))

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED:
        for p in parents:
            if p.requires_grad or p._parents:
                out._parents = parents
                out._backward = backward
                break
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# --- primitive operations -----------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    return _make(a.data + b.data, (a, b),
                 lambda g: ((a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(g, b.data.shape))))


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _make(a.data - b.data, (a, b),
                 lambda g: ((a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(-g, b.data.shape))))


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _make(a.data * b.data, (a, b),
                 lambda g: ((a, _unbroadcast(g * b.data, a.data.shape)),
                            (b, _unbroadcast(g * a.data, b.data.shape))))


def div(a: Tensor, b: Tensor) -> Tensor:
    return _make(a.data / b.data, (a, b),
                 lambda g: ((a, _unbroadcast(g / b.data, a.data.shape)),
                            (b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D or batched 3-D matrix product; batch dims must match exactly."""
    if a.data.ndim == 3 or b.data.ndim == 3:
        if a.data.ndim != b.data.ndim or a.data.shape[0] != b.data.shape[0]:
            raise ValueError(f"batched matmul needs equal batch dims, got {a.shape} @ {b.shape}")

    def backward(g):
        return (
            (a, np.matmul(g, np.swapaxes(b.data, -1, -2))),
            (b, np.matmul(np.swapaxes(a.data, -1, -2), g)),
        )

    return _make(np.matmul(a.data, b.data), (a, b), backward)


def transpose(a: Tensor, axes: tuple) -> Tensor:
    inverse = [0] * len(axes)
    for i, ax in enumerate(axes):
        inverse[ax] = i
    inverse = tuple(inverse)
    return _make(a.data.transpose(axes), (a,), lambda g: ((a, g.transpose(inverse)),))


def reshape(a: Tensor, shape: tuple) -> Tensor:
    old = a.data.shape
    return _make(a.data.reshape(shape), (a,), lambda g: ((a, g.reshape(old)),))


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        pieces = np.split(g, splits, axis=axis)
        return tuple(zip(tensors, pieces))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def backward(g):
        if axis is None:
            return ((a, np.broadcast_to(g, a.data.shape).copy()),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return ((a, np.broadcast_to(gg, a.data.shape).copy()),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return ((a, (g - dot) * y),)

    return _make(y, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: ((a, g * (1.0 - y * y)),))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return _make(y, (a,), lambda g: ((a, g * y),))


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: ((a, g / a.data),))


def gelu(a: Tensor) -> Tensor:
    """tanh-approximated Gaussian error linear unit."""
    x = a.data
    u = GELU_C * (x + GELU_A * x**3)
    t = np.tanh(u)

    def backward(g):
        du = GELU_C * (1.0 + 3.0 * GELU_A * x * x)
        return ((a, g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)),)

    return _make(0.5 * x * (1.0 + t), (a,), backward)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return ((table, gt),)

    return _make(table.data[ids], (table,), backward)


def masked_fill(a: Tensor, mask, value=-np.inf) -> Tensor:
    mask = np.asarray(mask, dtype=bool)
    keep = ~mask

    def backward(g):
        return ((a, g * keep),)

    return _make(np.where(mask, _DTYPE(value), a.data), (a,), backward)


def dropout(a: Tensor, rate: float, rng: np.random.Generator, train: bool) -> Tensor:
    """Inverted dropout; identity when not training or rate is 0."""
    if not train or rate <= 0.0:
        return a
    mask = (rng.random(a.data.shape) >= rate).astype(_DTYPE) / _DTYPE(1.0 - rate)
    return _make(a.data * mask, (a,), lambda g: ((a, g * mask),))


# --- backward pass -------------------------------------------------------------


def backward(loss: Tensor):
    """Populate .grad of every reachable trainable from a scalar loss."""
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")
    topo: list[Tensor] = []
    seen = set()
    stack = [(loss, False)]
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
            if id(p) not in seen:
                stack.append((p, False))
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad += g
        if node._backward is None:
            continue
        for parent, pg in node._backward(g):
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


class Adam:
    """Standard Adam with bias correction; moments persist across steps."""

    def __init__(self, params, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


# --- checkpoint files -----------------------------------------------------------
#
# One JSON manifest line (format version, hyperparameters, tensor names and
# shapes) followed by the raw little-endian float32 payloads in manifest order.

CHECKPOINT_VERSION = 1


def save_checkpoint(path, arrays: dict[str, np.ndarray], hyperparameters: dict):
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "hyperparameters": hyperparameters,
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in arrays.items()],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest, sort_keys=True).encode("utf-8") + b"\n")
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f4").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        manifest = json.loads(fh.readline().decode("utf-8"))
        if manifest.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {manifest.get('format_version')}")
        arrays = {}
        for entry in manifest["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(4 * count)
            if len(buf) != 4 * count:
                raise ValueError(f"truncated payload for tensor {entry['name']}")
            arrays[entry["name"]] = np.frombuffer(buf, dtype="<f4").reshape(shape).astype(_DTYPE)
    return arrays, manifest["hyperparameters"]
