"""End-to-end helpers: train cost models, track, recognize actions."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

from .actions import RecognitionConfig, recognize_timeline
from .costs import (
    AssociationCosts,
    FitOptions,
    build_training_pairs,
    detection_labels,
    fit_observation_cost,
)
from .flow import AssociationConfig, associate
from .metrics import match_frame
from .model import Observation, TrackRow, Trajectory, trajectories_to_rows
from .online import OnlineConfig, track_online
from .trees import BoostOptions, fit_transition_model

CLUTTER_ID_OFFSET = 1_000_000


@dataclass(frozen=True)
class TrainConfig:
    bias: float = -2.0
    c_entr: float = 10.0
    c_exit: float = 10.0
    max_gap: int = 30
    iou_thresh: float = 0.5
    neg_ratio: float = 3.0
    seed: int = 0
    paf_constant: float | None = None
    boost: BoostOptions = field(default_factory=BoostOptions)
    fit: FitOptions = field(default_factory=FitOptions)


def detection_trajectories(
    gt: Sequence[TrackRow],
    detections: Sequence[Observation],
    iou_thresh: float = 0.5,
) -> list[Trajectory]:
    """Ground-truth identities expressed over detection indices.

    Detections are assigned per frame to gt boxes by IoU (Hungarian, at
    ``iou_thresh``); unassigned detections become singleton trajectories so
    they serve as negatives when training the transition model.
    """
    gt_f = defaultdict(list)
    for r in gt:
        gt_f[r.frame].append((r.id, r.bbox))
    det_f = defaultdict(list)
    for i, o in enumerate(detections):
        det_f[o.frame].append((i, o.bbox))
    members = defaultdict(list)
    assigned = set()
    for f in sorted(det_f):
        m = match_frame(gt_f.get(f, []), det_f[f], {}, iou_thresh)
        for g, i in m.pairs.items():
            members[g].append(i)
            assigned.add(i)
    trajs = [Trajectory.from_members(g, ms, detections) for g, ms in sorted(members.items())]
    for i in range(len(detections)):
        if i not in assigned:
            trajs.append(Trajectory.from_members(CLUTTER_ID_OFFSET + i, [i], detections))
    return trajs


def train_costs(gt: Sequence[TrackRow], detections: Sequence[Observation], cfg: TrainConfig | None = None) -> AssociationCosts:
    cfg = cfg or TrainConfig()
    labels = detection_labels(detections, gt, cfg.iou_thresh)
    logistic = fit_observation_cost(
        [(o.det_score, y) for o, y in zip(detections, labels)], cfg.bias, cfg.fit
    )
    trajs = detection_trajectories(gt, detections, cfg.iou_thresh)
    pairs = build_training_pairs(
        trajs, detections, cfg.max_gap, cfg.neg_ratio, cfg.seed, cfg.paf_constant
    )
    ensemble = fit_transition_model(pairs, cfg.boost)
    return AssociationCosts(logistic, ensemble, cfg.c_entr, cfg.c_exit)


def track(
    detections: Sequence[Observation],
    costs: AssociationCosts,
    mode: str = "offline",
    max_gap: int = 30,
    max_misses: int | None = None,
    gate: float | None = None,
) -> list[Trajectory]:
    if mode == "offline":
        trajs, _ = associate(detections, AssociationConfig(max_gap, costs))
        return trajs
    if mode == "online":
        kw = {"max_misses": max_gap - 1 if max_misses is None else max_misses}
        if gate is not None:
            kw["gate"] = gate
        return track_online(detections, costs, OnlineConfig(**kw))
    raise ValueError(f"unknown tracking mode {mode!r}")


def track_rows(
    detections: Sequence[Observation],
    trajectories: Sequence[Trajectory],
    rcfg: RecognitionConfig | None = None,
) -> list[TrackRow]:
    """Rows for ``trajectories``, labelled by sliding-window recognition if ``rcfg``."""
    timeline = recognize_timeline(trajectories, detections, rcfg) if rcfg else None
    return trajectories_to_rows(trajectories, detections, timeline)
