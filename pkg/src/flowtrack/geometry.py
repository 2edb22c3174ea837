"""Box arithmetic: IoU and the local/global crop regions fed to the PAF extractor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BBox, ValidationError


@dataclass(frozen=True)
class CropConfig:
    mu: float = 3.0
    image_w: float = 3840.0
    image_h: float = 2160.0

    def __post_init__(self):
        if not self.mu >= 1.0:
            raise ValidationError(f"expansion ratio must be >= 1, got {self.mu}")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValidationError("image dimensions must be positive")


def iou(a: BBox, b: BBox) -> float:
    if a == b:
        return 1.0
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    # guard rounding so identical boxes give exactly 1 and the range stays [0, 1]
    return min(1.0, inter / union)


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    """Pairwise IoU between two box lists (vectorised :func:`iou`)."""
    if len(boxes_a) == 0 or len(boxes_b) == 0:
        return np.zeros((len(boxes_a), len(boxes_b)))
    a = np.array([bb.as_list() for bb in boxes_a], dtype=float)
    b = np.array([bb.as_list() for bb in boxes_b], dtype=float)
    x1 = np.maximum(a[:, None, 0], b[None, :, 0])
    y1 = np.maximum(a[:, None, 1], b[None, :, 1])
    x2 = np.minimum(a[:, None, 0] + a[:, None, 2], b[None, :, 0] + b[None, :, 2])
    y2 = np.minimum(a[:, None, 1] + a[:, None, 3], b[None, :, 1] + b[None, :, 3])
    iw = np.clip(x2 - x1, 0, None)
    ih = np.clip(y2 - y1, 0, None)
    inter = iw * ih
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    out = np.minimum(1.0, inter / union)
    out[np.all(a[:, None, :] == b[None, :, :], axis=2)] = 1.0
    return out


def square_local_crop(box: BBox) -> BBox:
    """Square around the box center whose side is the box's long side."""
    side = max(box.w, box.h)
    cx, cy = box.center
    return BBox(cx - side / 2.0, cy - side / 2.0, side, side)


def global_crop(local: BBox, cfg: CropConfig) -> BBox:
    """Expand a local crop by ``cfg.mu`` about its center (unclipped)."""
    if cfg.mu == 1.0:
        return local
    side = cfg.mu * max(local.w, local.h)
    cx, cy = local.center
    return BBox(cx - side / 2.0, cy - side / 2.0, side, side)


def clip_to_image(box: BBox, cfg: CropConfig) -> BBox:
    x1 = max(box.x, 0.0)
    y1 = max(box.y, 0.0)
    x2 = min(box.x + box.w, cfg.image_w)
    y2 = min(box.y + box.h, cfg.image_h)
    if x2 <= x1 or y2 <= y1:
        raise ValidationError(f"box {box} lies outside the {cfg.image_w}x{cfg.image_h} image")
    if (x1, y1, x2 - x1, y2 - y1) == (box.x, box.y, box.w, box.h):
        return box
    return BBox(x1, y1, x2 - x1, y2 - y1)


def crop_pair(box: BBox, cfg: CropConfig, clip: bool = True) -> tuple[BBox, BBox]:
    """Local and global crop regions for one detection."""
    local = square_local_crop(box)
    glob = global_crop(local, cfg)
    if clip:
        return clip_to_image(local, cfg), clip_to_image(glob, cfg)
    return local, glob


def contains(outer: BBox, inner: BBox, tol: float = 1e-9) -> bool:
    return (
        outer.x <= inner.x + tol
        and outer.y <= inner.y + tol
        and outer.x + outer.w >= inner.x + inner.w - tol
        and outer.y + outer.h >= inner.y + inner.h - tol
    )
