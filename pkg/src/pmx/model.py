"""Task models: backbone plus head, with checkpoint round-tripping.

Two head families share the same convolutional encoder-decoder:

  cluster   the full stack: transformer decoder produces cluster centers Q,
            the task reads the shared probability map P = softmax(F Q^T)
            (class identities / bin centers / sphere segments).
  baseline  per-pixel regression: one linear map straight from F, no
            queries, no clusters.

Checkpoints store every parameter under its name, model shape under
``meta/`` entries, and (when given) optimizer state under ``opt/``, so a
file alone reconstructs the model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from . import formats, heads
from .backbone import Backbone, BackboneConfig, Encoder
from .errors import ContractError
from .rng import SplitMix64, mix_seed_index
from .tensor import Tensor, no_grad

TASKS = ("seg", "depth", "normal")
VARIANTS = ("kmeans", "standard")
HEAD_KINDS = ("cluster", "baseline")


@dataclass(frozen=True)
class ModelConfig:
    task: str
    k: int = 4
    d: int = 64
    n_dec: int = 2
    widths: Tuple[int, int, int] = (32, 64, 64)
    variant: str = "kmeans"
    head: str = "cluster"
    classes: int = 4
    d_min: float = 0.5
    d_max: float = 10.0

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ContractError(f"unknown task {self.task!r}")
        if self.head not in HEAD_KINDS:
            raise ContractError(f"unknown head kind {self.head!r}")
        if self.task == "seg" and self.head == "cluster" and self.k != self.classes:
            raise ContractError(
                f"segmentation requires K = C (one query per class): K={self.k}, C={self.classes}")
        BackboneConfig(self.widths, self.d, self.n_dec, self.k, self.variant).validate()


class Model:
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        bb = BackboneConfig(cfg.widths, cfg.d, cfg.n_dec, cfg.k, cfg.variant)
        self.backbone: Optional[Backbone] = None
        self.encoder: Optional[Encoder] = None
        if cfg.head == "cluster":
            self.backbone = Backbone(bb, seed)
        else:
            self.encoder = Encoder(SplitMix64(seed), bb)
        hgen = SplitMix64(mix_seed_index(seed, 0x6EAD))
        self.bins_head = self.normal_head = self.baseline_head = None
        if cfg.head == "cluster":
            if cfg.task == "depth":
                self.bins_head = heads.BinsHead(hgen, cfg.d)
            elif cfg.task == "normal":
                self.normal_head = heads.NormalHead(hgen, cfg.d)
        else:
            self.baseline_head = heads.BaselineHead(
                hgen, cfg.d, cfg.task, cfg.classes, cfg.d_min, cfg.d_max)

    # ---- forward ---------------------------------------------------------

    def _features(self, images: Tensor):
        if self.backbone is not None:
            return self.backbone(images)
        fmap = self.encoder(images)
        b, d, h4, w4 = fmap.shape
        f = fmap.reshape(b, d, h4 * w4).transpose_last2()
        return f, None, (h4, w4)

    def train_outputs(self, images: Tensor) -> Dict[str, object]:
        """Graph tensors the loss consumes, at full resolution.

        seg    'logits': (B, HW, C) upsampled raw logits
        depth  'depth':  (B, HW) meters, plus 'bins' (B, K)
        normal 'normal': (B, HW, 3) unit rows, plus 'prenorm' diagnostics
        """
        cfg = self.cfg
        f, q, grid = self._features(images)
        if cfg.head == "baseline":
            out = self.baseline_head(f, grid)
            key = {"seg": "logits", "depth": "depth", "normal": "normal"}[cfg.task]
            return {key: out, "grid": grid}
        if cfg.task == "seg":
            logits4 = f.matmul(q.transpose_last2())
            return {"logits": heads.upsample_rows(logits4, grid), "grid": grid}
        p_full = heads.upsample_probability_map(heads.probability_map(f, q), grid)
        if cfg.task == "depth":
            b, _ = self.bins_head(q, cfg.d_min, cfg.d_max)
            return {"depth": heads.depth_compose(p_full, b), "bins": b, "grid": grid}
        v = self.normal_head(q)
        n, prenorm = heads.normal_compose(p_full, v)
        return {"normal": n, "v": v, "prenorm": prenorm, "grid": grid}

    def predict(self, images: Tensor) -> np.ndarray:
        """Numpy predictions, no graph.  seg: (B, H, W) class ids via the
        upsampled renormalized probability map; depth: (B, H, W) meters;
        normal: (B, H, W, 3) unit vectors."""
        bsz, _, h, w = images.shape
        with no_grad():
            if self.cfg.task == "seg" and self.cfg.head == "cluster":
                f, q, grid = self._features(images)
                p_full = heads.upsample_probability_map(heads.probability_map(f, q), grid)
                labels = heads.seg_predict(p_full, self.cfg.classes)
                return labels.reshape(bsz, h, w)
            out = self.train_outputs(images)
        if self.cfg.task == "seg":
            return out["logits"].data.argmax(axis=-1).reshape(bsz, h, w)
        if self.cfg.task == "depth":
            return out["depth"].data.reshape(bsz, h, w)
        return out["normal"].data.reshape(bsz, h, w, 3)

    def probability_panels(self, images: Tensor) -> np.ndarray:
        """Upsampled renormalized P as (B, K, H, W) numpy (cluster head only)."""
        if self.backbone is None:
            raise ContractError("baseline head has no probability map")
        bsz, _, h, w = images.shape
        with no_grad():
            f, q, grid = self._features(images)
            p_full = heads.upsample_probability_map(heads.probability_map(f, q), grid)
        return p_full.data.swapaxes(-1, -2).reshape(bsz, self.cfg.k, h, w)

    def bin_centers(self, images: Tensor) -> np.ndarray:
        if self.bins_head is None:
            raise ContractError("model has no depth-bin head")
        with no_grad():
            _, q, _ = self._features(images)
            b, _ = self.bins_head(q, self.cfg.d_min, self.cfg.d_max)
        return b.data

    # ---- parameters ------------------------------------------------------------

    def params(self) -> Dict[str, Tensor]:
        out: Dict[str, Tensor] = {}
        if self.backbone is not None:
            out.update(self.backbone.params())
        else:
            out.update(self.encoder.params())
        for head in (self.bins_head, self.normal_head, self.baseline_head):
            if head is not None:
                out.update(head.params())
        return out

    def load_state(self, tensors: Dict[str, np.ndarray]) -> None:
        params = self.params()
        missing = sorted(set(params) - set(tensors))
        if missing:
            raise ContractError(f"checkpoint missing parameters {missing[:4]}")
        for name, p in params.items():
            arr = tensors[name]
            if arr.shape != p.shape:
                raise ContractError(f"{name}: checkpoint shape {arr.shape} vs model {p.shape}")
            p.data = arr.astype(p.data.dtype)
            p.grad = None


# ---- checkpoint glue ------------------------------------------------------------

_META_FIELDS = ("task", "head", "variant", "k", "d", "n_dec", "classes")


def _meta_tensors(cfg: ModelConfig) -> Dict[str, np.ndarray]:
    return {
        "meta/task": np.float32(TASKS.index(cfg.task)),
        "meta/head": np.float32(HEAD_KINDS.index(cfg.head)),
        "meta/variant": np.float32(VARIANTS.index(cfg.variant)),
        "meta/k": np.float32(cfg.k),
        "meta/d": np.float32(cfg.d),
        "meta/n_dec": np.float32(cfg.n_dec),
        "meta/classes": np.float32(cfg.classes),
        "meta/widths": np.asarray(cfg.widths, dtype=np.float32),
        "meta/drange": np.asarray([cfg.d_min, cfg.d_max], dtype=np.float32),
    }


def config_from_meta(tensors: Dict[str, np.ndarray]) -> ModelConfig:
    try:
        widths = tuple(int(x) for x in tensors["meta/widths"])
        d_min, d_max = (float(x) for x in tensors["meta/drange"])
        return ModelConfig(
            task=TASKS[int(tensors["meta/task"])],
            head=HEAD_KINDS[int(tensors["meta/head"])],
            variant=VARIANTS[int(tensors["meta/variant"])],
            k=int(tensors["meta/k"]),
            d=int(tensors["meta/d"]),
            n_dec=int(tensors["meta/n_dec"]),
            classes=int(tensors["meta/classes"]),
            widths=widths,
            d_min=d_min,
            d_max=d_max,
        )
    except KeyError as exc:
        raise ContractError(f"checkpoint lacks model metadata: {exc}") from exc


def save_model(path: str, model: Model, opt_state: Dict[str, np.ndarray] = None) -> None:
    tensors: Dict[str, np.ndarray] = {n: p.data for n, p in model.params().items()}
    tensors.update(_meta_tensors(model.cfg))
    if opt_state:
        for name, arr in opt_state.items():
            tensors[f"opt/{name}"] = arr
    formats.write_checkpoint(path, tensors)


def load_model(path: str) -> Tuple[Model, Dict[str, np.ndarray]]:
    """Rebuild a model from a checkpoint; returns it plus any opt/ state."""
    tensors = formats.read_checkpoint(path)
    cfg = config_from_meta(tensors)
    model = Model(cfg, seed=0)
    model.load_state(tensors)
    opt = {n[4:]: a for n, a in tensors.items() if n.startswith("opt/")}
    return model, opt
