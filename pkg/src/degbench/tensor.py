"""Dense tensors with define-by-run reverse-mode differentiation.

Every op builds its output eagerly and, when any input is tracked, records a
closure that maps the output gradient to input gradients. ``backward`` walks
the recorded graph in reverse topological order.

Storage is float32 by default; float64 inputs stay float64 so finite
difference oracles can run the same code at higher precision.
"""
from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_DTYPE = np.float32

_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording on the current thread."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name", "__weakref__")
    # make ndarray (op) Tensor defer to the Tensor's reflected operator
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype.kind != "f":
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.name = name

    # ------------------------------------------------------------------ basics
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{tag})"

    def __len__(self) -> int:
        return len(self.data)

    # ----------------------------------------------------------- arithmetic
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return reduce_mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def backward(self, grad: np.ndarray | None = None):
        return backward(self, grad)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if dtype is None and isinstance(x, (int, float)):
        return Tensor(np.asarray(x, dtype=DEFAULT_DTYPE))
    return Tensor(x, dtype=dtype)


def _coerce(a, b) -> tuple[Tensor, Tensor]:
    # python scalars adopt the dtype of the tensor operand
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype))
    return as_tensor(a), as_tensor(b)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    out = Tensor(data)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------- backward

def backward(loss: Tensor, grad: np.ndarray | None = None) -> dict[Tensor, np.ndarray]:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every tracked leaf ``t``.

    Returns a map from each tracked leaf to its gradient.
    """
    if grad is None:
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        grad = np.ones_like(loss.data)
    if not loss.requires_grad:
        return {}

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
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
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.asarray(grad, dtype=loss.dtype)}
    leaves: dict[Tensor, np.ndarray] = {}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            leaves[node] = node.grad
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return leaves


# ------------------------------------------------------------ elementwise

def add(a, b) -> Tensor:
    a, b = _coerce(a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _coerce(a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _coerce(a, b)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = _coerce(a, b)
    out = a.data / b.data

    def bw(g):
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

    return _make(out, (a, b), bw)


def power(a: Tensor, exponent: float) -> Tensor:
    a = as_tensor(a)
    out = a.data ** exponent

    def bw(g):
        return (g * exponent * a.data ** (exponent - 1),)

    return _make(out, (a,), bw)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g * 0.5 / out,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    out = np.empty_like(a.data)
    pos = a.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    e = np.exp(a.data[~pos])
    out[~pos] = e / (1.0 + e)
    return _make(out, (a,), lambda g: (g * out * (1 - out),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1 - out * out),))


def activation(a: Tensor, kind: str) -> Tensor:
    if kind in ("linear", "none", None):
        return a
    if kind == "relu":
        return relu(a)
    if kind == "sigmoid":
        return sigmoid(a)
    if kind == "tanh":
        return tanh(a)
    if kind == "softmax":
        return softmax(a, axis=-1)
    raise ValueError(f"unknown activation {kind!r}")


# --------------------------------------------------------------- structure

def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    src = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return _make(np.ascontiguousarray(a.data.transpose(axes)), (a,), lambda g: (g.transpose(inv),))


def flatten(a: Tensor) -> Tensor:
    return reshape(a, (a.shape[0], -1))


# -------------------------------------------------------------- reductions

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims, dtype=np.float64).astype(a.dtype)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).astype(a.dtype),)

    return _make(out, (a,), bw)


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    return reduce_sum(a, axis, keepdims) * (1.0 / count)


def l2_norm(a: Tensor, axis: int = -1, keepdims: bool = False, eps: float = 1e-9) -> Tensor:
    """Euclidean norm along ``axis``; ``eps`` inside the root keeps the gradient finite at 0."""
    sq = a.data.astype(np.float64) ** 2
    out = np.sqrt(sq.sum(axis=axis, keepdims=True) + eps).astype(a.dtype)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * a.data / out,)

    res = out if keepdims else np.squeeze(out, axis=axis)
    return _make(res, (a,), bw)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (a,), bw)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)

    def bw(g):
        return (g - soft * g.sum(axis=axis, keepdims=True),)

    return _make(out, (a,), bw)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    logp = log_softmax(logits, axis=-1)
    onehot = np.zeros(logits.shape, dtype=logits.dtype)
    onehot[np.arange(n), labels] = 1.0
    return reduce_sum(logp * onehot) * (-1.0 / n)


# ------------------------------------------------------------------ matmul

def _mm(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # batched outer products are much faster as broadcast multiplies
    if x.shape[-1] == 1:
        return x * y
    return x @ y


def matmul(a, b) -> Tensor:
    a, b = _coerce(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs operands of rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def bw(g):
        ga = _mm(g, np.swapaxes(b.data, -1, -2)) if a.requires_grad else None
        gb = _mm(np.swapaxes(a.data, -1, -2), g) if b.requires_grad else None
        return (None if ga is None else _unbroadcast(ga, a.shape),
                None if gb is None else _unbroadcast(gb, b.shape))

    return _make(a.data @ b.data, (a, b), bw)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Dense layer: ``x @ weight + bias`` with ``weight`` shaped (in, out)."""
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


# ------------------------------------------------------------ convolution

def _same_pads(size: int, k: int, stride: int) -> tuple[int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


def conv_output_size(size: int, k: int, stride: int, padding: str) -> int:
    if padding == "same":
        return -(-size // stride)
    if padding == "valid":
        return (size - k) // stride + 1
    raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")


def _pad_input(x: np.ndarray, kh: int, kw: int, stride: int, padding: str):
    if padding == "valid":
        return x, (0, 0, 0, 0)
    if padding != "same":
        raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")
    ph = _same_pads(x.shape[2], kh, stride)
    pw = _same_pads(x.shape[3], kw, stride)
    if ph == (0, 0) and pw == (0, 0):
        return x, (0, 0, 0, 0)
    xp = np.pad(x, ((0, 0), (0, 0), ph, pw))
    return xp, (ph[0], ph[1], pw[0], pw[1])


def _crop_pad(gx: np.ndarray, pads, shape):
    top, bottom, left, right = pads
    return gx[:, :, top:top + shape[2], left:left + shape[3]]


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: str = "valid") -> Tensor:
    """2-D cross-correlation of ``x`` (N,C,H,W) with ``kernel`` (F,C,kh,kw)."""
    if x.ndim != 4 or kernel.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and kernel, got {x.shape} and {kernel.shape}")
    n, c, h, w = x.shape
    f, kc, kh, kw = kernel.shape
    if kc != c:
        raise ValueError(f"conv2d channel mismatch: input has {c}, kernel expects {kc}")
    if stride < 1:
        raise ValueError("stride must be positive")
    xp, pads = _pad_input(x.data, kh, kw, stride, padding)
    hp, wp = xp.shape[2], xp.shape[3]
    if kh > hp or kw > wp:
        raise ValueError(f"kernel {kh}x{kw} larger than padded input {hp}x{wp}")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1

    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride][:, :, :ho, :wo]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * kh * kw)
    kmat = kernel.data.reshape(f, -1)
    out2d = cols @ kmat.T
    out = np.ascontiguousarray(out2d.reshape(n, ho, wo, f).transpose(0, 3, 1, 2))

    def bw(g):
        g2d = g.transpose(0, 2, 3, 1).reshape(-1, f)
        gk = (g2d.T @ cols).reshape(kernel.shape) if kernel.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (g2d @ kmat).reshape(n, ho, wo, c, kh, kw)
            gxp = np.zeros(xp.shape, dtype=xp.dtype)
            for a in range(kh):
                for b in range(kw):
                    gxp[:, :, a:a + stride * ho:stride, b:b + stride * wo:stride] += \
                        gcols[:, :, :, :, a, b].transpose(0, 3, 1, 2)
            gx = _crop_pad(gxp, pads, x.shape)
        return gx, gk

    return _make(out, (x, kernel), bw)


def depthwise_conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: str = "same") -> Tensor:
    """Per-channel cross-correlation: ``kernel`` (C,1,k,k) filters channel c with plane c."""
    if x.ndim != 4 or kernel.ndim != 4:
        raise ValueError(f"depthwise_conv2d expects 4-D input and kernel, got {x.shape} and {kernel.shape}")
    n, c, h, w = x.shape
    kc, depth, kh, kw = kernel.shape
    if kc != c or depth != 1:
        raise ValueError(f"depthwise kernel must be ({c},1,k,k), got {kernel.shape}")
    xp, pads = _pad_input(x.data, kh, kw, stride, padding)
    hp, wp = xp.shape[2], xp.shape[3]
    if kh > hp or kw > wp:
        raise ValueError(f"kernel {kh}x{kw} larger than padded input {hp}x{wp}")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    kd = kernel.data[:, 0]
    acc = np.zeros((n, c, ho, wo), dtype=np.float64)
    for a in range(kh):
        for b in range(kw):
            acc += xp[:, :, a:a + stride * ho:stride, b:b + stride * wo:stride] * kd[None, :, a, b, None, None]
    out = acc.astype(np.result_type(x.dtype, kernel.dtype))

    def bw(g):
        gk = np.zeros(kernel.shape, dtype=kernel.dtype)
        gxp = np.zeros(xp.shape, dtype=xp.dtype) if x.requires_grad else None
        for a in range(kh):
            for b in range(kw):
                sl = (slice(None), slice(None), slice(a, a + stride * ho, stride), slice(b, b + stride * wo, stride))
                gk[:, 0, a, b] = (g * xp[sl]).sum(axis=(0, 2, 3), dtype=np.float64)
                if gxp is not None:
                    gxp[sl] += g * kd[None, :, a, b, None, None]
        gx = _crop_pad(gxp, pads, x.shape) if gxp is not None else None
        return gx, gk

    return _make(out, (x, kernel), bw)


def max_pool2d(x: Tensor, k: int = 2) -> Tensor:
    """Non-overlapping k x k max pooling; trailing rows/cols that do not fill a window are dropped."""
    n, c, h, w = x.shape
    ho, wo = h // k, w // k
    if ho < 1 or wo < 1:
        raise ValueError(f"pool size {k} larger than input {h}x{w}")
    xc = x.data[:, :, :ho * k, :wo * k]
    blocks = xc.reshape(n, c, ho, k, wo, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, k * k)
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def bw(g):
        gb = np.zeros(blocks.shape, dtype=x.dtype)
        np.put_along_axis(gb, idx[..., None], g[..., None], axis=-1)
        gb = gb.reshape(n, c, ho, wo, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * k, wo * k)
        gx = np.zeros(x.shape, dtype=x.dtype)
        gx[:, :, :ho * k, :wo * k] = gb
        return (gx,)

    return _make(np.ascontiguousarray(out), (x,), bw)


def dropout(x: Tensor, rate: float, rng) -> tuple[Tensor, np.ndarray]:
    """Inverted dropout. Returns the output and the keep-mask that produced it.

    ``rng`` is a :class:`degbench.rng.Prng`.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = rng.uniform(size=x.shape) >= rate
    scale = np.asarray(1.0 / (1.0 - rate), dtype=x.dtype)
    m = keep.astype(x.dtype) * scale
    return _make(x.data * m, (x,), lambda g: (g * m,)), keep


def parameters_of(tensors: Iterable[Tensor]) -> list[Tensor]:
    return [t for t in tensors if t.requires_grad]
