"""CLEAR-MOT tracking metrics and frame-level action-detection mAP.

``DET`` in MOTA is the number of ground-truth boxes.  ID switches are counted
at the frame where a ground-truth identity is matched to a hypothesis id
different from the one it was last matched to (gaps included).  A
fragmentation is counted whenever a ground-truth track that was matched at its
previous frame is present but unmatched.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .geometry import iou, iou_matrix
from .model import BBox, TrackRow
from .online import hungarian_solve


@dataclass
class FrameMatch:
    pairs: dict[int, int] = field(default_factory=dict)  # gt id -> hyp id
    fp: int = 0
    fn: int = 0


def match_frame(
    gt_boxes: Sequence[tuple[int, BBox]],
    hyp_boxes: Sequence[tuple[int, BBox]],
    prev: dict[int, int],
    iou_thresh: float = 0.5,
) -> FrameMatch:
    """Match one frame, keeping still-valid correspondences from ``prev``."""
    if not 0.0 < iou_thresh <= 1.0:
        raise ValueError(f"IoU threshold must be in (0, 1], got {iou_thresh}")
    gt = dict(gt_boxes)
    hyp = dict(hyp_boxes)
    pairs: dict[int, int] = {}
    for g, h in prev.items():
        if g in gt and h in hyp and h not in pairs.values() and iou(gt[g], hyp[h]) >= iou_thresh:
            pairs[g] = h
    used_h = set(pairs.values())
    free_g = [g for g, _ in gt_boxes if g not in pairs]
    free_h = [h for h, _ in hyp_boxes if h not in used_h]
    if free_g and free_h:
        ious = iou_matrix([gt[g] for g in free_g], [hyp[h] for h in free_h])
        ok = ious >= iou_thresh
        if ok.any():
            cost = np.where(ok, 1.0 - ious, 1e6)
            for r, c in hungarian_solve(cost):
                if ok[r, c]:
                    pairs[free_g[r]] = free_h[c]
    return FrameMatch(pairs, fp=len(hyp) - len(pairs), fn=len(gt) - len(pairs))


@dataclass
class MotReport:
    fn_count: int
    fp_count: int
    id_switches: int
    fragmentations: int
    det_total: int
    matches: int
    mota: float
    recall: float
    precision: float

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        head = f"{'Recall':>8} {'Precision':>10} {'IDs':>6} {'FM':>6} {'FP':>6} {'FN':>6} {'MOTA':>8}"
        row = (
            f"{self.recall:8.2f} {self.precision:10.2f} {self.id_switches:6d} "
            f"{self.fragmentations:6d} {self.fp_count:6d} {self.fn_count:6d} {self.mota:8.2f}"
        )
        return head + "\n" + row


def _by_frame(rows: Sequence[TrackRow]) -> dict[int, list[tuple[int, BBox]]]:
    out: dict[int, list] = defaultdict(list)
    for r in rows:
        out[r.frame].append((r.id, r.bbox))
    return out


def mot_report(gt: Sequence[TrackRow], hyp: Sequence[TrackRow], iou_thresh: float = 0.5) -> MotReport:
    det_total = len(gt)
    if det_total == 0:
        raise ValueError("ground truth is empty (DET = 0)")
    gt_f, hyp_f = _by_frame(gt), _by_frame(hyp)
    last_match: dict[int, int] = {}
    was_matched: dict[int, bool] = {}
    fn = fp = ids = fm = matched = 0
    for f in sorted(set(gt_f) | set(hyp_f)):
        m = match_frame(gt_f.get(f, []), hyp_f.get(f, []), last_match, iou_thresh)
        fn += m.fn
        fp += m.fp
        matched += len(m.pairs)
        for g, _ in gt_f.get(f, []):
            if g in m.pairs:
                h = m.pairs[g]
                if g in last_match and last_match[g] != h:
                    ids += 1
                last_match[g] = h
                was_matched[g] = True
            else:
                if was_matched.get(g, False):
                    fm += 1
                was_matched[g] = False
    mota = 100.0 * (1.0 - (fn + ids + fp) / det_total)
    recall = 100.0 * matched / det_total
    precision = 100.0 * matched / (matched + fp) if matched + fp else 0.0
    return MotReport(fn, fp, ids, fm, det_total, matched, mota, recall, precision)


def average_precision(predictions: Sequence[tuple[float, bool]], n_gt: int) -> float:
    """All-point interpolated AP (area under the precision envelope)."""
    if n_gt < 0:
        raise ValueError("n_gt must be >= 0")
    if n_gt == 0 or not predictions:
        return 0.0
    order = sorted(range(len(predictions)), key=lambda k: -predictions[k][0])
    tp = np.array([1.0 if predictions[k][1] else 0.0 for k in order])
    ctp = np.cumsum(tp)
    prec = ctp / np.arange(1, len(tp) + 1)
    # envelope: best precision at any equal-or-higher recall
    env = np.maximum.accumulate(prec[::-1])[::-1]
    return float(np.sum(env[tp == 1.0]) / n_gt)


@dataclass
class ApReport:
    per_class_ap: dict[int, float]
    mAP: float
    class_names: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_class_ap": {str(k): v for k, v in sorted(self.per_class_ap.items())},
            "mAP": self.mAP,
        }

    def table(self) -> str:
        lines = [f"{'class':<18} {'AP (%)':>8}"]
        for c, ap in sorted(self.per_class_ap.items()):
            name = self.class_names[c] if c < len(self.class_names) else str(c)
            lines.append(f"{name:<18} {100 * ap:8.2f}")
        lines.append(f"{'mAP':<18} {100 * self.mAP:8.2f}")
        return "\n".join(lines)


def map_action_detection(
    gt: Sequence[TrackRow],
    hyp: Sequence[TrackRow],
    iou_thresh: float = 0.5,
    class_names: Sequence[str] = (),
    pr_curves: dict | None = None,
) -> ApReport:
    """Per-class AP for frame-level action detection and their mean.

    A hypothesis row predicts class ``c`` when ``c`` is among its labels, with
    confidence ``row.score_of(c)``.  Predictions are matched greedily in score
    order to the best-overlapping unconsumed gt box of that class in the same
    frame.  If ``pr_curves`` is given it is filled with per-class
    ``(recall, precision)`` points.
    """
    classes = sorted({c for r in gt for c in r.labels})
    gt_f = defaultdict(list)
    for r in gt:
        gt_f[r.frame].append(r)
    per_class = {}
    for c in classes:
        n_gt = sum(1 for r in gt if c in r.labels)
        preds = [r for r in hyp if c in r.labels]
        order = sorted(range(len(preds)), key=lambda k: -preds[k].score_of(c))
        consumed: set[tuple[int, int]] = set()
        scored = []
        for k in order:
            p = preds[k]
            best, best_key = iou_thresh, None
            for g in gt_f.get(p.frame, ()):
                key = (g.frame, g.id)
                if c not in g.labels or key in consumed:
                    continue
                v = iou(p.bbox, g.bbox)
                if v >= best:
                    best, best_key = v, key
            if best_key is not None:
                consumed.add(best_key)
            scored.append((p.score_of(c), best_key is not None))
        per_class[c] = average_precision(scored, n_gt)
        if pr_curves is not None:
            tp = np.cumsum([s[1] for s in scored], dtype=float)
            rank = np.arange(1, len(scored) + 1)
            pr_curves[c] = list(zip((tp / n_gt).tolist(), (tp / rank).tolist()))
    mean = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return ApReport(per_class, mean, list(class_names))
