"""Training and evaluation loops.

Determinism contract: everything downstream of (dataset bytes, TrainConfig)
is reproducible.  The sample order is a pure function of (seed, step) -
concatenated per-epoch Fisher-Yates permutations keyed by the run seed and
epoch index - so resuming from a checkpoint needs only the optimizer state
and step count, not a serialized cursor.

AdamW follows the decoupled form: the weight-decay shrink p *= 1 - lr*wd
is applied before the bias-corrected adaptive update.  Parameters whose
names start with ``enc/`` (the convolutional encoder-decoder) take a
reduced learning rate via a group multiplier.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractError, TrainingDiverged
from .losses import LossConfig, total_loss
from .metrics import (PRIMARY_METRIC, MetricReport, confusion_matrix,
                      depth_metrics, normal_metrics, report_for)
from .model import Model, ModelConfig, load_model, save_model
from .rng import SplitMix64, mix_seed_index
from .scene import Sample
from .tensor import Tensor

LR_PRESETS = {"pretrain": 5e-4, "finetune": 5e-5}


@dataclass(frozen=True)
class TrainConfig:
    task: str
    steps: int = 1000
    batch: int = 8
    lr: float = LR_PRESETS["pretrain"]
    seed: int = 0
    k: int = 4
    variant: str = "kmeans"
    head: str = "cluster"
    eval_every: int = 0          # 0: evaluate only at the end
    weight_decay: float = 0.05
    backbone_lr_mult: float = 0.1
    clip_norm: float = 10.0      # 0 disables clipping
    loss: LossConfig = field(default_factory=LossConfig)

    def validate(self) -> None:
        if self.steps < 1 or self.batch < 1:
            raise ContractError("steps and batch size must be positive")
        if self.lr < 0 or self.weight_decay < 0:
            raise ContractError("lr and weight decay must be nonnegative")


class AdamW:
    def __init__(self, params: Dict[str, Tensor], lr: float, weight_decay: float = 0.05,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 backbone_lr_mult: float = 0.1):
        self.params = params
        self.names = sorted(params)
        self.lr = lr
        self.wd = weight_decay
        self.b1, self.b2 = betas
        self.eps = eps
        self.mult = backbone_lr_mult
        self.t = 0
        self.m = {n: np.zeros_like(params[n].data) for n in self.names}
        self.v = {n: np.zeros_like(params[n].data) for n in self.names}

    def _group_lr(self, name: str) -> float:
        return self.lr * (self.mult if name.startswith("enc/") else 1.0)

    def zero_grad(self) -> None:
        for n in self.names:
            self.params[n].grad = None

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for n in self.names:
            p = self.params[n]
            glr = self._group_lr(n)
            p.data *= 1.0 - glr * self.wd
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[n] = self.b1 * self.m[n] + (1.0 - self.b1) * g
            self.v[n] = self.b2 * self.v[n] + (1.0 - self.b2) * g * g
            mhat = self.m[n] / c1
            vhat = self.v[n] / c2
            p.data -= glr * mhat / (np.sqrt(vhat) + self.eps)

    def clip_global_norm(self, max_norm: float) -> float:
        total = 0.0
        for n in self.names:
            g = self.params[n].grad
            if g is not None:
                total += float((g.astype(np.float64) ** 2).sum())
        norm = math.sqrt(total)
        if max_norm > 0 and norm > max_norm:
            scale = max_norm / norm
            for n in self.names:
                if self.params[n].grad is not None:
                    self.params[n].grad *= scale
        return norm

    def state(self) -> Dict[str, np.ndarray]:
        out = {"step": np.float32(self.t)}
        for n in self.names:
            out[f"m/{n}"] = self.m[n]
            out[f"v/{n}"] = self.v[n]
        return out

    def load(self, state: Dict[str, np.ndarray]) -> None:
        self.t = int(state["step"])
        for n in self.names:
            self.m[n] = state[f"m/{n}"].astype(self.m[n].dtype).reshape(self.m[n].shape)
            self.v[n] = state[f"v/{n}"].astype(self.v[n].dtype).reshape(self.v[n].shape)


# ---- deterministic sample order -------------------------------------------------


def epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    gen = SplitMix64(mix_seed_index(seed, 0xE90C + epoch))
    return gen.permutation(n)


class _Order:
    """Pure (seed, step) -> batch indices, with a one-epoch memo."""

    def __init__(self, seed: int, n: int, batch: int):
        self.seed, self.n, self.batch = seed, n, batch
        self._cache: Dict[int, np.ndarray] = {}

    def batch_indices(self, step: int) -> np.ndarray:
        out: List[int] = []
        pos = step * self.batch
        while len(out) < self.batch:
            epoch, off = divmod(pos, self.n)
            perm = self._cache.get(epoch)
            if perm is None:
                self._cache = {epoch: epoch_permutation(self.seed, epoch, self.n)}
                perm = self._cache[epoch]
            take = min(self.batch - len(out), self.n - off)
            out.extend(perm[off:off + take].tolist())
            pos += take
        return np.asarray(out, dtype=np.int64)


# ---- batch assembly ---------------------------------------------------------------


def _batch_arrays(samples: Sequence[Sample], idx: np.ndarray):
    images = np.stack([samples[i].image.transpose(2, 0, 1) for i in idx])
    labels = np.stack([samples[i].labels for i in idx])
    depth = np.stack([samples[i].depth for i in idx])
    normal = np.stack([samples[i].normal for i in idx])
    return images, labels, depth, normal


def _targets(task: str, labels, depth, normal) -> Dict[str, np.ndarray]:
    b, h, w = labels.shape
    if task == "seg":
        return {"labels": labels.reshape(-1)}
    mask = np.ones((b, h * w), dtype=np.float32)
    if task == "depth":
        return {"depth": depth.reshape(b, h * w), "mask": mask}
    return {"normal": normal.reshape(b, h * w, 3), "mask": mask}


# ---- evaluation ----------------------------------------------------------------------


def evaluate(model: Optional[Model], samples: Sequence[Sample], task: str,
             oracle: bool = False, batch: int = 8, classes: int = 4) -> MetricReport:
    """Pooled metrics over the split.  oracle=True scores the ground truth
    against itself (a perfect-report bypass used to validate the pipeline)."""
    if model is not None:
        if model.cfg.task != task:
            raise ContractError(f"checkpoint trained for {model.cfg.task!r}, not {task!r}")
        classes = model.cfg.classes
    con = np.zeros((classes, classes), dtype=np.int64)
    preds: List[np.ndarray] = []
    gts: List[np.ndarray] = []
    pixels = 0
    for start in range(0, len(samples), batch):
        chunk = list(range(start, min(start + batch, len(samples))))
        images, labels, depth, normal = _batch_arrays(samples, np.asarray(chunk))
        if oracle:
            pred = {"seg": labels, "depth": depth, "normal": normal}[task]
        else:
            pred = model.predict(Tensor(images))
        if task == "seg":
            con += confusion_matrix(pred, labels, classes)
            pixels += labels.size
        elif task == "depth":
            preds.append(pred.reshape(-1))
            gts.append(depth.reshape(-1))
            pixels += depth.size
        else:
            preds.append(pred.reshape(-1, 3))
            gts.append(normal.reshape(-1, 3))
            pixels += normal.size // 3
    if task == "seg":
        tp = np.diag(con).astype(np.float64)
        union = con.sum(0) + con.sum(1) - np.diag(con)
        iou = np.where(union > 0, tp / np.where(union > 0, union, 1), np.nan)
        return report_for("seg", {"miou": float(np.nanmean(iou))}, pixels)
    p = np.concatenate(preds)
    g = np.concatenate(gts)
    ones = np.ones(len(p))
    if task == "depth":
        return report_for("depth", depth_metrics(p, g, ones), pixels)
    return report_for("normal", normal_metrics(p, g, ones), pixels)


# ---- training --------------------------------------------------------------------------


@dataclass
class TrainResult:
    model: Model
    trace: List[Tuple[int, float, Dict[str, float]]]
    reports: List[Tuple[int, MetricReport]]
    final_report: Optional[MetricReport]
    best_step: int


def _model_config(cfg: TrainConfig, classes: int, d_min: float, d_max: float) -> ModelConfig:
    return ModelConfig(task=cfg.task, k=cfg.k, variant=cfg.variant, head=cfg.head,
                       classes=classes, d_min=d_min, d_max=d_max)


def write_trace(path: str, trace: List[Tuple[int, float, Dict[str, float]]]) -> None:
    if not trace:
        return
    keys = sorted(trace[0][2])
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["step", "total"] + keys)
        for step, total, terms in trace:
            out.writerow([step, f"{total:.8g}"] + [f"{terms[k]:.8g}" for k in keys])


def train(samples: Sequence[Sample], cfg: TrainConfig, classes: int = 4,
          d_min: float = 0.5, d_max: float = 10.0,
          val_samples: Sequence[Sample] = None,
          out_path: str = None, trace_path: str = None,
          resume_from: str = None) -> TrainResult:
    cfg.validate()
    if len(samples) == 0:
        raise ContractError("training needs a nonempty dataset")
    if resume_from is not None:
        model, opt_state = load_model(resume_from)
        if model.cfg.task != cfg.task:
            raise ContractError(f"resume checkpoint is for task {model.cfg.task!r}")
    else:
        model = Model(_model_config(cfg, classes, d_min, d_max), seed=cfg.seed)
        opt_state = None
    params = model.params()
    opt = AdamW(params, cfg.lr, cfg.weight_decay, backbone_lr_mult=cfg.backbone_lr_mult)
    if opt_state:
        opt.load(opt_state)
    order = _Order(cfg.seed, len(samples), cfg.batch)
    h, w = samples[0].labels.shape
    trace: List[Tuple[int, float, Dict[str, float]]] = []
    reports: List[Tuple[int, MetricReport]] = []
    best: Tuple[float, int] = None
    best_name, best_hi = PRIMARY_METRIC[cfg.task]

    for step in range(opt.t, cfg.steps):
        idx = order.batch_indices(step)
        images, labels, depth, normal = _batch_arrays(samples, idx)
        outputs = model.train_outputs(Tensor(images))
        prediction = outputs.get({"seg": "logits", "depth": "depth", "normal": "normal"}[cfg.task])
        if cfg.task == "seg":
            b, n, c = prediction.shape
            prediction = prediction.reshape(b * n, c)
        loss, terms = total_loss(cfg.task, prediction, _targets(cfg.task, labels, depth, normal),
                                 cfg.loss, (h, w))
        value = float(loss.data)
        if not math.isfinite(value):
            raise TrainingDiverged(
                f"step {step}: loss {value}; terms {terms}; batch {idx.tolist()}; "
                f"|images| mean {float(np.abs(images).mean()):.4g}")
        opt.zero_grad()
        loss.backward()
        opt.clip_global_norm(cfg.clip_norm)
        opt.step()
        trace.append((step, value, terms))
        if (cfg.eval_every and val_samples is not None
                and (step + 1) % cfg.eval_every == 0 and step + 1 < cfg.steps):
            rep = evaluate(model, val_samples, cfg.task)
            reports.append((step + 1, rep))
            score = rep.primary()
            if best is None or (score > best[0] if best_hi else score < best[0]):
                best = (score, step + 1)
                if out_path:
                    save_model(out_path + ".best", model, opt.state())

    final_report = evaluate(model, val_samples, cfg.task) if val_samples is not None else None
    if final_report is not None:
        reports.append((cfg.steps, final_report))
        score = final_report.primary()
        if best is None or (score > best[0] if best_hi else score < best[0]):
            best = (score, cfg.steps)
            if out_path:
                save_model(out_path + ".best", model, opt.state())
    if out_path:
        save_model(out_path, model, opt.state())
    if trace_path:
        write_trace(trace_path, trace)
    return TrainResult(model, trace, reports, final_report,
                       best[1] if best else cfg.steps)


# ---- harnesses ------------------------------------------------------------------------------


def ablate_k(samples: Sequence[Sample], cfg: TrainConfig, k_list: Sequence[int],
             val_samples: Sequence[Sample], **kw) -> List[Tuple[int, MetricReport]]:
    """One run per K with a shared seed and schedule."""
    if not k_list:
        raise ContractError("ablation needs at least one K")
    out = []
    for k in k_list:
        res = train(samples, replace(cfg, k=k), val_samples=val_samples, **kw)
        out.append((k, res.final_report))
    return out


def compare_baseline(samples: Sequence[Sample], cfg: TrainConfig,
                     val_samples: Sequence[Sample], **kw) -> Dict[str, MetricReport]:
    """Cluster head vs per-pixel regression baseline, same schedule."""
    cluster = train(samples, replace(cfg, head="cluster"), val_samples=val_samples, **kw)
    baseline = train(samples, replace(cfg, head="baseline"), val_samples=val_samples, **kw)
    return {"cluster": cluster.final_report, "baseline": baseline.final_report}
