"""Evaluation metrics, pooled over all pixels of a split.

All computation is 64-bit numpy on plain arrays (no graphs).  Inlier
comparisons are strict less-than; the median of an even count takes the
lower of the two middles; classes absent from both prediction and ground
truth are excluded from mIoU.  Accumulation pools pixels across the whole
dataset rather than averaging per image.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .errors import ContractError

DEPTH_DELTA_BASE = 1.25
NORMAL_DEGREES = (11.5, 22.5, 30.0)

METRIC_KEYS = {
    "seg": ("miou",),
    "depth": ("rms", "a_rel", "log10", "delta1", "delta2", "delta3"),
    "normal": ("mean_deg", "median_deg", "rms_deg", "inlier_11", "inlier_22", "inlier_30"),
}

# (key, higher is better) used for best-checkpoint selection and ablations
PRIMARY_METRIC = {
    "seg": ("miou", True),
    "depth": ("delta1", True),
    "normal": ("mean_deg", False),
}


@dataclass(frozen=True)
class MetricReport:
    task: str
    metrics: Dict[str, float]
    pixels: int

    def to_json(self) -> str:
        payload = {"task": self.task, "pixels": self.pixels}
        payload.update({k: self.metrics[k] for k in METRIC_KEYS[self.task]})
        return json.dumps(payload, sort_keys=True)

    def primary(self) -> float:
        return self.metrics[PRIMARY_METRIC[self.task][0]]


def confusion_matrix(pred: np.ndarray, gt: np.ndarray, classes: int,
                     ignore_label: int = 255) -> np.ndarray:
    pred = np.asarray(pred).reshape(-1)
    gt = np.asarray(gt).reshape(-1)
    valid = gt != ignore_label
    idx = gt[valid].astype(np.int64) * classes + pred[valid].astype(np.int64)
    return np.bincount(idx, minlength=classes * classes).reshape(classes, classes)


def miou(pred: np.ndarray, gt: np.ndarray, classes: int,
         ignore_label: int = 255) -> Tuple[np.ndarray, float]:
    """Per-class IoU (nan where the class is absent from both) and their mean."""
    con = confusion_matrix(pred, gt, classes, ignore_label).astype(np.float64)
    tp = np.diag(con)
    union = con.sum(axis=0) + con.sum(axis=1) - tp
    iou = np.where(union > 0, tp / np.where(union > 0, union, 1.0), np.nan)
    return iou, float(np.nanmean(iou))


def depth_metrics(d_pred: np.ndarray, d_gt: np.ndarray, mask: np.ndarray) -> Dict[str, float]:
    sel = np.asarray(mask, dtype=bool).reshape(-1)
    if not sel.any():
        raise ContractError("depth metrics: empty mask")
    d = np.asarray(d_pred, dtype=np.float64).reshape(-1)[sel]
    g = np.asarray(d_gt, dtype=np.float64).reshape(-1)[sel]
    diff = d - g
    ratio = np.maximum(d / g, g / d)
    out = {
        "rms": float(np.sqrt((diff ** 2).mean())),
        "a_rel": float((np.abs(diff) / g).mean()),
        "log10": float(np.abs(np.log10(d) - np.log10(g)).mean()),
    }
    for i in (1, 2, 3):
        out[f"delta{i}"] = float((ratio < DEPTH_DELTA_BASE ** i).mean())
    return out


def _lower_median(values: np.ndarray) -> float:
    v = np.sort(values)
    return float(v[(v.size - 1) // 2])


def angular_error_deg(n_pred: np.ndarray, n_gt: np.ndarray) -> np.ndarray:
    """Per-pixel angle in degrees after defensive renormalization."""
    p = np.asarray(n_pred, dtype=np.float64).reshape(-1, 3)
    g = np.asarray(n_gt, dtype=np.float64).reshape(-1, 3)
    p = p / np.maximum(np.linalg.norm(p, axis=-1, keepdims=True), 1e-12)
    g = g / np.maximum(np.linalg.norm(g, axis=-1, keepdims=True), 1e-12)
    dot = np.clip((p * g).sum(axis=-1), -1.0, 1.0)
    return np.degrees(np.arccos(dot))


def normal_metrics(n_pred: np.ndarray, n_gt: np.ndarray, mask: np.ndarray) -> Dict[str, float]:
    sel = np.asarray(mask, dtype=bool).reshape(-1)
    if not sel.any():
        raise ContractError("normal metrics: empty mask")
    theta = angular_error_deg(
        np.asarray(n_pred).reshape(-1, 3)[sel],
        np.asarray(n_gt).reshape(-1, 3)[sel],
    )
    out = {
        "mean_deg": float(theta.mean()),
        "median_deg": _lower_median(theta),
        "rms_deg": float(np.sqrt((theta ** 2).mean())),
    }
    for deg, key in zip(NORMAL_DEGREES, ("inlier_11", "inlier_22", "inlier_30")):
        out[key] = float((theta < deg).mean())
    return out


def report_for(task: str, metrics: Dict[str, float], pixels: int) -> MetricReport:
    missing = [k for k in METRIC_KEYS[task] if k not in metrics]
    if missing:
        raise ContractError(f"{task} report missing keys {missing}")
    if task == "depth":
        d1, d2, d3 = (metrics[f"delta{i}"] for i in (1, 2, 3))
        if not (d1 <= d2 <= d3):
            raise ContractError("delta inliers must be monotone")
    return MetricReport(task, dict(metrics), pixels)
