"""Cluster-prediction heads over a shared probability map.

All three dense tasks read the same per-pixel distribution over K clusters,

    P = softmax over K of (F Q^T),

and differ only in what each cluster stands for: a fixed class identity
(segmentation, K = C), a learned depth bin center (depth), or a learned
unit direction on the sphere (normals).  Continuous outputs are the
P-weighted linear combination of the cluster values.

P is computed at the feature stride and bilinearly upsampled 4x before
composition, with rows renormalized to sum exactly to 1.  Segmentation
trains on the upsampled raw logits instead (softmax order does not change
the argmax, and cross-entropy wants logits).

A per-pixel regression baseline head (one linear map from F, no clusters)
is included for comparison runs.
"""

from __future__ import annotations

import math
from typing import Dict, Tuple

import numpy as np

from .backbone import Linear
from .errors import ContractError, ShapeError
from .rng import SplitMix64
from .tensor import Tensor


def probability_map(f: Tensor, q: Tensor) -> Tensor:
    """softmax over K of F Q^T; accepts (N,D)/(K,D) or batched (B,N,D)/(B,K,D)."""
    if f.shape[-1] != q.shape[-1]:
        raise ShapeError(f"embedding dims differ: F {f.shape} vs Q {q.shape}")
    if f.ndim != q.ndim:
        raise ShapeError(f"F {f.shape} and Q {q.shape} must both be batched or both flat")
    return f.matmul(q.transpose_last2()).softmax(axis=-1)


def upsample_rows(rows: Tensor, grid: Tuple[int, int]) -> Tensor:
    """(B, h4*w4, C) row maps to (B, 16*h4*w4, C) by two bilinear doublings."""
    b, n, c = rows.shape
    h4, w4 = grid
    if n != h4 * w4:
        raise ShapeError(f"{n} rows do not tile a {h4}x{w4} grid")
    x = rows.transpose_last2().reshape(b, c, h4, w4)
    x = x.bilinear_upsample2x().bilinear_upsample2x()
    return x.reshape(b, c, 16 * h4 * w4).transpose_last2()


def renormalize_rows(p: Tensor) -> Tensor:
    s = p.sum(axis=-1, keepdims=True).clamp_min(1e-12)
    return p / s.expand_axis(p.ndim - 1, p.shape[-1])


def upsample_probability_map(p: Tensor, grid: Tuple[int, int]) -> Tensor:
    """Full-resolution P: bilinear 4x then exact row renormalization."""
    return renormalize_rows(upsample_rows(p, grid))


def seg_predict(p: Tensor, classes: int) -> np.ndarray:
    """Per-pixel argmax class; ties go to the lowest index.  K must equal C."""
    if p.shape[-1] != classes:
        raise ContractError(f"segmentation needs K = C: K={p.shape[-1]}, C={classes}")
    return p.data.argmax(axis=-1)


def bins_from_logits(logits: Tensor, d_min: float, d_max: float) -> Tuple[Tensor, Tensor]:
    """Adaptive bin centers from per-query scalars.

    Widths are the softmax of the logits scaled to the depth range, and
    center i sits at d_min + cumulative width up to i minus half its own
    width.  Centers are therefore strictly increasing and strictly inside
    (d_min, d_max) for any finite logits.
    """
    if not d_min < d_max:
        raise ContractError(f"depth range [{d_min}, {d_max}] invalid")
    w = logits.softmax(axis=-1) * (d_max - d_min)
    b = w.cumsum_last() - w * 0.5 + d_min
    return b, w


class BinsHead:
    """Two-layer MLP from each cluster center to a bin logit."""

    def __init__(self, gen: SplitMix64, d: int):
        self.fc1 = Linear(gen, d, d)
        self.fc2 = Linear(gen, d, 1, std=math.sqrt(1.0 / d))

    def __call__(self, q: Tensor, d_min: float, d_max: float) -> Tuple[Tensor, Tensor]:
        logits = self.fc2(self.fc1(q).gelu())        # (B, K, 1)
        logits = logits.reshape(q.shape[0], q.shape[1])
        return bins_from_logits(logits, d_min, d_max)

    def params(self, prefix: str = "head/bins") -> Dict[str, Tensor]:
        out = self.fc1.params(f"{prefix}.fc1")
        out.update(self.fc2.params(f"{prefix}.fc2"))
        return out


def depth_compose(p: Tensor, b: Tensor) -> Tensor:
    """d(pixel) = sum_i P(pixel, i) b_i: a convex combination of bin centers.

    p is (B, N, K), b is (B, K); returns (B, N).
    """
    if p.shape[-1] != b.shape[-1] or p.shape[0] != b.shape[0]:
        raise ShapeError(f"probability map {p.shape} vs bins {b.shape}")
    bk = b.reshape(b.shape[0], b.shape[1], 1)
    return p.matmul(bk).reshape(p.shape[0], p.shape[1])


class NormalHead:
    """Two-layer MLP from each cluster center to a unit sphere-segment vector."""

    def __init__(self, gen: SplitMix64, d: int):
        self.fc1 = Linear(gen, d, d)
        self.fc2 = Linear(gen, d, 3, std=math.sqrt(1.0 / d))

    def __call__(self, q: Tensor) -> Tensor:
        raw = self.fc2(self.fc1(q).gelu())           # (B, K, 3)
        return _unit_rows(raw)

    def params(self, prefix: str = "head/normal") -> Dict[str, Tensor]:
        out = self.fc1.params(f"{prefix}.fc1")
        out.update(self.fc2.params(f"{prefix}.fc2"))
        return out


def _unit_rows(v: Tensor) -> Tensor:
    norm = (v * v).sum(axis=-1, keepdims=True).sqrt().clamp_min(1e-8)
    return v / norm.expand_axis(v.ndim - 1, v.shape[-1])


def normal_compose(p: Tensor, v: Tensor) -> Tuple[Tensor, np.ndarray]:
    """P-weighted sum of segment centers, renormalized to unit length.

    Returns the unit normal map (B, N, 3) and the pre-normalization norms
    (numpy, no gradient) as a degeneracy diagnostic: a norm near zero means
    the combination collapsed (e.g. equal weight on antipodal centers) and
    the epsilon guard decided the direction.
    """
    if p.shape[-1] != v.shape[1] or p.shape[0] != v.shape[0]:
        raise ShapeError(f"probability map {p.shape} vs segment centers {v.shape}")
    raw = p.matmul(v)
    prenorm = np.sqrt((raw.data ** 2).sum(axis=-1))
    return _unit_rows(raw), prenorm


class BaselineHead:
    """Per-pixel regression head: one linear map (a 1x1 convolution over the
    feature rows) straight from F, upsampled to full resolution.

    seg: C logits per pixel.  depth: sigmoid squashed into (d_min, d_max).
    normal: L2-normalized 3-vector.
    """

    def __init__(self, gen: SplitMix64, d: int, task: str, classes: int,
                 d_min: float = 0.0, d_max: float = 1.0):
        self.task = task
        self.d_min = d_min
        self.d_max = d_max
        out_dim = {"seg": classes, "depth": 1, "normal": 3}[task]
        self.fc = Linear(gen, d, out_dim, std=math.sqrt(1.0 / d))

    def __call__(self, f: Tensor, grid: Tuple[int, int]) -> Tensor:
        rows = upsample_rows(self.fc(f), grid)
        if self.task == "seg":
            return rows                                   # (B, HW, C) logits
        if self.task == "depth":
            b, n, _ = rows.shape
            s = rows.reshape(b, n).sigmoid()
            return s * (self.d_max - self.d_min) + self.d_min
        return _unit_rows(rows)                           # (B, HW, 3)

    def params(self, prefix: str = "head/baseline") -> Dict[str, Tensor]:
        return self.fc.params(f"{prefix}.fc")
