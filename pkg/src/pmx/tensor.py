"""Reverse-mode autodiff over numpy arrays.

A ``Tensor`` wraps one contiguous float ndarray plus an optional gradient.
Ops build a DAG by recording parent tensors and a backward closure; calling
``backward()`` on a scalar loss runs the closures in reverse topological
order, accumulating into ``.grad`` additively.

The op set is deliberately closed: elementwise arithmetic, matmul (2D, batched
3D, and 3D @ 2D), 3x3 convolution at stride 1 or 2 with padding 1, softmax,
layer norm over the last axis, bilinear 2x upsampling, reductions, and a small
set of shape/indexing ops.  There is no general broadcasting; the only
sanctioned broadcast is the trailing bias add in ``bias_add`` and the explicit
``expand_axis`` / ``expand_leading`` repeats, whose backward is a sum.

Integer payloads (class labels, gather indices) stay plain numpy arrays and
never enter the graph.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import precision
from .errors import ShapeError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, metric eval)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backfn")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=precision.dtype())
        # ascontiguousarray would promote 0-d to shape (1,); keep scalars 0-d
        self.data: np.ndarray = arr if arr.flags["C_CONTIGUOUS"] else arr.copy(order="C")
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: Tuple[Tensor, ...] = ()
        self._backfn: Optional[Callable[[np.ndarray], None]] = None

    # ---- plumbing ---------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.grad = None
        out.requires_grad = False
        out._parents = ()
        out._backfn = None
        return out

    def zero_grad(self) -> None:
        self.grad = None

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Backprop from a scalar.  Raises ShapeError on non-scalar tensors."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {self.shape}")
        order: List[Tensor] = []
        seen = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
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
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backfn is not None and node.grad is not None:
                node._backfn(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # ---- elementwise arithmetic -------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            _same_shape(self, other, "add")
            out = _result(self.data + other.data, (self, other))
            if out._backfn is _PENDING:
                def back(g, a=self, b=other):
                    if a.requires_grad:
                        a._accum(g)
                    if b.requires_grad:
                        b._accum(g)
                out._backfn = back
            return out
        out = _result(self.data + other, (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self: a._accum(g)
        return out

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            _same_shape(self, other, "sub")
            out = _result(self.data - other.data, (self, other))
            if out._backfn is _PENDING:
                def back(g, a=self, b=other):
                    if a.requires_grad:
                        a._accum(g)
                    if b.requires_grad:
                        b._accum(-g)
                out._backfn = back
            return out
        return self.__add__(-other)

    def __rsub__(self, other):
        return self.__neg__().__add__(other)

    def __neg__(self):
        out = _result(-self.data, (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self: a._accum(-g)
        return out

    def __mul__(self, other):
        if isinstance(other, Tensor):
            _same_shape(self, other, "mul")
            out = _result(self.data * other.data, (self, other))
            if out._backfn is _PENDING:
                def back(g, a=self, b=other):
                    if a.requires_grad:
                        a._accum(g * b.data)
                    if b.requires_grad:
                        b._accum(g * a.data)
                out._backfn = back
            return out
        out = _result(self.data * other, (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self, c=other: a._accum(g * c)
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            _same_shape(self, other, "div")
            out = _result(self.data / other.data, (self, other))
            if out._backfn is _PENDING:
                def back(g, a=self, b=other):
                    if a.requires_grad:
                        a._accum(g / b.data)
                    if b.requires_grad:
                        b._accum(-g * a.data / (b.data * b.data))
                out._backfn = back
            return out
        return self.__mul__(1.0 / other)

    def __rtruediv__(self, other):
        out = _result(other / self.data, (self,))
        if out._backfn is _PENDING:
            def back(g, a=self, c=other):
                a._accum(-g * c / (a.data * a.data))
            out._backfn = back
        return out

    # ---- unary elementwise --------------------------------------------------

    def relu(self) -> "Tensor":
        out = _result(np.maximum(self.data, 0), (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self: a._accum(g * (a.data > 0))
        return out

    def gelu(self) -> "Tensor":
        """Tanh-approximation gelu: 0.5 x (1 + tanh(c (x + 0.044715 x^3)))."""
        c = math.sqrt(2.0 / math.pi)
        x = self.data
        inner = c * (x + 0.044715 * x**3)
        t = np.tanh(inner)
        out = _result(0.5 * x * (1.0 + t), (self,))
        if out._backfn is _PENDING:
            def back(g, a=self, t=t, c=c):
                xx = a.data
                dinner = c * (1.0 + 3.0 * 0.044715 * xx * xx)
                a._accum(g * (0.5 * (1.0 + t) + 0.5 * xx * (1.0 - t * t) * dinner))
            out._backfn = back
        return out

    def sigmoid(self) -> "Tensor":
        # exp on the negative half only, to stay finite for large |x|
        x = self.data
        s = np.empty_like(x)
        pos = x >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        e = np.exp(x[~pos])
        s[~pos] = e / (1.0 + e)
        out = _result(s, (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self, s=s: a._accum(g * s * (1.0 - s))
        return out

    def exp(self) -> "Tensor":
        y = np.exp(self.data)
        out = _result(y, (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self, y=y: a._accum(g * y)
        return out

    def log(self) -> "Tensor":
        out = _result(np.log(self.data), (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self: a._accum(g / a.data)
        return out

    def sqrt(self) -> "Tensor":
        y = np.sqrt(self.data)
        out = _result(y, (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self, y=y: a._accum(g * 0.5 / y)
        return out

    def abs(self) -> "Tensor":
        out = _result(np.abs(self.data), (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self: a._accum(g * np.sign(a.data))
        return out

    def clamp(self, lo: Optional[float] = None, hi: Optional[float] = None) -> "Tensor":
        """Clip to [lo, hi]; gradient passes where lo <= x <= hi (subgradient 1
        at the boundary)."""
        out = _result(np.clip(self.data, lo, hi), (self,))
        if out._backfn is _PENDING:
            def back(g, a=self, lo=lo, hi=hi):
                mask = np.ones_like(a.data, dtype=bool)
                if lo is not None:
                    mask &= a.data >= lo
                if hi is not None:
                    mask &= a.data <= hi
                a._accum(g * mask)
            out._backfn = back
        return out

    def clamp_min(self, lo: float) -> "Tensor":
        return self.clamp(lo=lo)

    # ---- linear algebra -----------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        a, b = self.data, other.data
        if a.ndim == 2 and b.ndim == 2:
            if a.shape[1] != b.shape[0]:
                raise ShapeError(f"matmul {a.shape} @ {b.shape}")
            out = _result(a @ b, (self, other))
            if out._backfn is _PENDING:
                def back(g, s=self, o=other):
                    if s.requires_grad:
                        s._accum(g @ o.data.T)
                    if o.requires_grad:
                        o._accum(s.data.T @ g)
                out._backfn = back
            return out
        if a.ndim == 3 and b.ndim == 3:
            if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
                raise ShapeError(f"matmul {a.shape} @ {b.shape}")
            out = _result(a @ b, (self, other))
            if out._backfn is _PENDING:
                def back(g, s=self, o=other):
                    if s.requires_grad:
                        s._accum(g @ o.data.swapaxes(-1, -2))
                    if o.requires_grad:
                        o._accum(s.data.swapaxes(-1, -2) @ g)
                out._backfn = back
            return out
        if a.ndim == 3 and b.ndim == 2:
            if a.shape[2] != b.shape[0]:
                raise ShapeError(f"matmul {a.shape} @ {b.shape}")
            out = _result(a @ b, (self, other))
            if out._backfn is _PENDING:
                def back(g, s=self, o=other):
                    if s.requires_grad:
                        s._accum(g @ o.data.T)
                    if o.requires_grad:
                        k = s.data.shape[-1]
                        n = o.data.shape[-1]
                        o._accum(s.data.reshape(-1, k).T @ g.reshape(-1, n))
                out._backfn = back
            return out
        raise ShapeError(f"matmul unsupported for ndim {a.ndim} @ {b.ndim}")

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return self.matmul(other)

    def transpose_last2(self) -> "Tensor":
        if self.ndim < 2:
            raise ShapeError("transpose_last2 needs ndim >= 2")
        out = _result(np.ascontiguousarray(self.data.swapaxes(-1, -2)), (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self: a._accum(np.ascontiguousarray(g.swapaxes(-1, -2)))
        return out

    # ---- normalization ------------------------------------------------------

    def softmax(self, axis: int = -1) -> "Tensor":
        x = self.data
        shifted = x - x.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=axis, keepdims=True)
        out = _result(y, (self,))
        if out._backfn is _PENDING:
            def back(g, a=self, y=y, axis=axis):
                dot = (g * y).sum(axis=axis, keepdims=True)
                a._accum(y * (g - dot))
            out._backfn = back
        return out

    def layernorm(self, gamma: "Tensor", beta: "Tensor", eps: float = 1e-5) -> "Tensor":
        """Normalize over the last axis, then scale and shift.

        gamma and beta are 1D of the feature size; their gradients sum over
        all leading axes.
        """
        d = self.shape[-1]
        if gamma.shape != (d,) or beta.shape != (d,):
            raise ShapeError(f"layernorm affine shapes {gamma.shape}/{beta.shape} for feature {d}")
        x = self.data
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = xc * inv
        out = _result(xhat * gamma.data + beta.data, (self, gamma, beta))
        if out._backfn is _PENDING:
            def back(g, a=self, gm=gamma, bt=beta, xhat=xhat, inv=inv, d=d):
                if gm.requires_grad:
                    gm._accum((g * xhat).reshape(-1, d).sum(axis=0))
                if bt.requires_grad:
                    bt._accum(g.reshape(-1, d).sum(axis=0))
                if a.requires_grad:
                    dxhat = g * gm.data
                    m1 = dxhat.mean(axis=-1, keepdims=True)
                    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
                    a._accum(inv * (dxhat - m1 - xhat * m2))
            out._backfn = back
        return out

    # ---- shape ops ------------------------------------------------------------

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        out = _result(self.data.reshape(shape), (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self, old=old: a._accum(g.reshape(old))
        return out

    def expand_axis(self, axis: int, n: int) -> "Tensor":
        """Repeat a size-1 axis n times.  Backward sums over that axis."""
        if self.shape[axis] != 1:
            raise ShapeError(f"expand_axis needs size 1 at axis {axis}, got {self.shape}")
        out = _result(np.repeat(self.data, n, axis=axis), (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self, axis=axis: a._accum(g.sum(axis=axis, keepdims=True))
        return out

    def expand_leading(self, n: int) -> "Tensor":
        """Prepend a new leading axis of size n.  Backward sums over it."""
        out = _result(np.ascontiguousarray(np.broadcast_to(self.data, (n,) + self.shape)), (self,))
        if out._backfn is _PENDING:
            out._backfn = lambda g, a=self: a._accum(g.sum(axis=0))
        return out

    def narrow(self, axis: int, start: int, length: int) -> "Tensor":
        """Contiguous slice along one axis.  Backward zero-pads."""
        idx = [slice(None)] * self.ndim
        idx[axis] = slice(start, start + length)
        out = _result(np.ascontiguousarray(self.data[tuple(idx)]), (self,))
        if out._backfn is _PENDING:
            def back(g, a=self, idx=tuple(idx)):
                full = np.zeros_like(a.data)
                full[idx] = g
                a._accum(full)
            out._backfn = back
        return out

    def cumsum_last(self) -> "Tensor":
        out = _result(np.cumsum(self.data, axis=-1), (self,))
        if out._backfn is _PENDING:
            def back(g, a=self):
                a._accum(np.flip(np.cumsum(np.flip(g, axis=-1), axis=-1), axis=-1))
            out._backfn = back
        return out

    # ---- reductions -----------------------------------------------------------

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        out = _result(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out._backfn is _PENDING:
            def back(g, a=self, axis=axis, keepdims=keepdims):
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                a._accum(np.broadcast_to(g, a.shape).copy())
            out._backfn = back
        return out

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        n = self.data.size if axis is None else self.shape[axis]
        out = _result(self.data.mean(axis=axis, keepdims=keepdims), (self,))
        if out._backfn is _PENDING:
            def back(g, a=self, axis=axis, keepdims=keepdims, n=n):
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                a._accum(np.broadcast_to(g, a.shape).copy() / n)
            out._backfn = back
        return out

    # ---- indexing ---------------------------------------------------------------

    def gather_rows(self, indices: np.ndarray) -> "Tensor":
        """Pick one column per row: out[i] = x[i, indices[i]].  x is 2D."""
        if self.ndim != 2:
            raise ShapeError(f"gather_rows needs a 2D tensor, got {self.shape}")
        idx = np.asarray(indices, dtype=np.int64)
        if idx.shape != (self.shape[0],):
            raise ShapeError(f"gather_rows indices {idx.shape} for tensor {self.shape}")
        rows = np.arange(self.shape[0])
        out = _result(self.data[rows, idx], (self,))
        if out._backfn is _PENDING:
            def back(g, a=self, rows=rows, idx=idx):
                full = np.zeros_like(a.data)
                np.add.at(full, (rows, idx), g)
                a._accum(full)
            out._backfn = back
        return out

    # ---- spatial ops ---------------------------------------------------------

    def conv2d(self, weight: "Tensor", bias: Optional["Tensor"] = None, stride: int = 1) -> "Tensor":
        """3x3 convolution with padding 1 at stride 1 or 2, NCHW layout.

        Forward lowers each input window to a row (im2col) and runs one gemm;
        backward runs the transposed gemms and scatter-adds the nine window
        taps back into a padded gradient image.
        """
        if stride not in (1, 2):
            raise ShapeError(f"conv2d stride must be 1 or 2, got {stride}")
        x, w = self.data, weight.data
        if x.ndim != 4 or w.ndim != 4 or w.shape[2:] != (3, 3):
            raise ShapeError(f"conv2d input {x.shape} weight {w.shape}")
        bsz, cin, h, wd = x.shape
        cout = w.shape[0]
        if w.shape[1] != cin:
            raise ShapeError(f"conv2d channels: input {cin}, weight {w.shape[1]}")
        if bias is not None and bias.shape != (cout,):
            raise ShapeError(f"conv2d bias shape {bias.shape} for {cout} filters")
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
        win = win[:, :, ::stride, ::stride]
        ho, wo = win.shape[2], win.shape[3]
        cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(bsz * ho * wo, cin * 9)
        wmat = w.reshape(cout, cin * 9)
        y2 = cols @ wmat.T
        if bias is not None:
            y2 = y2 + bias.data
        y = np.ascontiguousarray(y2.reshape(bsz, ho, wo, cout).transpose(0, 3, 1, 2))
        parents = (self, weight) if bias is None else (self, weight, bias)
        out = _result(y, parents)
        if out._backfn is _PENDING:
            def back(g, a=self, wt=weight, bt=bias, cols=cols, wmat=wmat,
                     bsz=bsz, cin=cin, h=h, wd=wd, ho=ho, wo=wo, cout=cout, stride=stride):
                g2 = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(-1, cout)
                if bt is not None and bt.requires_grad:
                    bt._accum(g2.sum(axis=0))
                if wt.requires_grad:
                    wt._accum((g2.T @ cols).reshape(cout, cin, 3, 3))
                if a.requires_grad:
                    dcols = (g2 @ wmat).reshape(bsz, ho, wo, cin, 3, 3).transpose(0, 3, 1, 2, 4, 5)
                    dxp = np.zeros((bsz, cin, h + 2, wd + 2), dtype=g.dtype)
                    for i in range(3):
                        for j in range(3):
                            dxp[:, :, i:i + stride * (ho - 1) + 1:stride,
                                j:j + stride * (wo - 1) + 1:stride] += dcols[:, :, :, :, i, j]
                    a._accum(dxp[:, :, 1:1 + h, 1:1 + wd])
            out._backfn = back
        return out

    def bilinear_upsample2x(self) -> "Tensor":
        """Double H and W of an NCHW tensor with align_corners=False bilinear
        interpolation.  Separable: y = L_h @ x @ L_w^T, so backward is the
        exact transpose."""
        if self.ndim != 4:
            raise ShapeError(f"bilinear_upsample2x needs NCHW, got {self.shape}")
        bsz, c, h, w = self.shape
        lh = _interp_matrix(h, self.data.dtype)
        lw = _interp_matrix(w, self.data.dtype)
        x2 = self.data.reshape(bsz * c, h, w)
        y2 = lh @ x2 @ lw.T
        out = _result(y2.reshape(bsz, c, 2 * h, 2 * w), (self,))
        if out._backfn is _PENDING:
            def back(g, a=self, lh=lh, lw=lw, bsz=bsz, c=c, h=h, w=w):
                g2 = g.reshape(bsz * c, 2 * h, 2 * w)
                a._accum((lh.T @ g2 @ lw).reshape(bsz, c, h, w))
            out._backfn = back
        return out

    def avg_pool2d(self, factor: int) -> "Tensor":
        """Non-overlapping mean pooling; H and W must divide by factor."""
        if self.ndim != 4:
            raise ShapeError(f"avg_pool2d needs NCHW, got {self.shape}")
        bsz, c, h, w = self.shape
        if h % factor or w % factor:
            raise ShapeError(f"avg_pool2d factor {factor} does not divide {h}x{w}")
        y = self.data.reshape(bsz, c, h // factor, factor, w // factor, factor).mean(axis=(3, 5))
        out = _result(y, (self,))
        if out._backfn is _PENDING:
            def back(g, a=self, factor=factor):
                up = np.repeat(np.repeat(g, factor, axis=2), factor, axis=3)
                a._accum(up / (factor * factor))
            out._backfn = back
        return out


# sentinel marking "graph node created, closure not yet attached"
def _PENDING(_g):  # pragma: no cover
    raise RuntimeError("backward closure was never attached")


def _result(data: np.ndarray, parents: Sequence[Tensor]) -> Tensor:
    if precision.debug() and not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite values in op output")
    data = np.asarray(data)
    out = Tensor.__new__(Tensor)
    out.data = data if data.flags["C_CONTIGUOUS"] else data.copy(order="C")
    out.grad = None
    out._parents = ()
    out._backfn = None
    out.requires_grad = False
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backfn = _PENDING
    return out


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


_interp_cache: dict = {}


def _interp_matrix(n: int, dtype) -> np.ndarray:
    """(2n, n) row-stochastic matrix for 2x bilinear upsampling with
    align_corners=False: output i samples input coordinate (i+0.5)/2 - 0.5,
    clamped to the edges."""
    key = (n, np.dtype(dtype).str)
    hit = _interp_cache.get(key)
    if hit is not None:
        return hit
    mat = np.zeros((2 * n, n), dtype=dtype)
    for i in range(2 * n):
        src = (i + 0.5) / 2.0 - 0.5
        i0 = math.floor(src)
        t = src - i0
        mat[i, min(max(i0, 0), n - 1)] += 1.0 - t
        mat[i, min(max(i0 + 1, 0), n - 1)] += t
    _interp_cache[key] = mat
    return mat


def bias_add(x: Tensor, b: Tensor) -> Tensor:
    """x + b with b broadcast over the leading axes; db sums over them."""
    d = x.shape[-1]
    if b.shape != (d,):
        raise ShapeError(f"bias_add: bias {b.shape} for feature size {d}")
    out = _result(x.data + b.data, (x, b))
    if out._backfn is _PENDING:
        def back(g, a=x, bb=b, d=d):
            if a.requires_grad:
                a._accum(g)
            if bb.requires_grad:
                bb._accum(g.reshape(-1, d).sum(axis=0))
        out._backfn = back
    return out


def one_hot(indices: np.ndarray, k: int) -> Tensor:
    """Constant one-hot tensor of shape indices.shape + (k,)."""
    idx = np.asarray(indices, dtype=np.int64)
    out = np.zeros(idx.shape + (k,), dtype=precision.dtype())
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return Tensor(out)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)
