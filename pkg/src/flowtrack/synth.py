"""Seeded synthetic tracking scenarios.

PRNG: numpy ``Generator(PCG64(seed))`` -- one stream per scenario, consumed
in this fixed order:

1. per class: PAF RGB anchor, then PAF FLOW anchor (``dim`` normals each);
2. per identity: visible span, start position, velocity, width, aspect,
   appearance anchor, action script;
3. per frame: camera shake (2 normals), then per visible identity in id
   order: position jitter (2), log-scale step (1), appearance noise,
   PAF RGB noise, PAF FLOW noise, action-score noise;
4. per frame: per gt box in id order: miss draw, box jitter (4), score;
   then the false-positive count ``Binomial(ceil(rate), rate / ceil(rate))``,
   and per false positive: anchor-or-random
   placement draw, box (5 uniforms), appearance, PAF RGB, PAF FLOW, action scores,
   score.

Anchors are unit vectors; a noisy embedding is ``anchor + N(0, std^2 I)``
renormalised.  Draws are always made (even at zero std or probability) so
turning one knob does not shift the rest of the stream.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .model import OKUTAMA_CLASSES, BBox, DatasetConfig, Observation, TrackRow, Trajectory

# Okutama groups: interactions (human-human, human-object) and no-interaction
INTERACTION_CLASSES = tuple(range(0, 7))
BASE_CLASSES = tuple(range(7, 12))


@dataclass
class ScenarioConfig:
    seed: int = 0
    n_identities: int = 4
    n_frames: int = 100
    image_w: float = 1920.0
    image_h: float = 1080.0
    appearance_dim: int = 16
    paf_rgb_dim: int = 8
    paf_flow_dim: int = 8
    class_names: tuple[str, ...] = OKUTAMA_CLASSES
    base_classes: tuple[int, ...] = BASE_CLASSES
    interaction_classes: tuple[int, ...] = INTERACTION_CLASSES
    # motion
    min_span_fraction: float = 1.0
    box_width: tuple[float, float] = (40.0, 70.0)
    aspect: tuple[float, float] = (1.8, 2.6)
    speed_std: float = 3.0
    jitter_std: float = 0.0
    scale_drift_std: float = 0.0
    camera_shake_std: float = 0.0
    # features
    appearance_noise_std: float = 0.05
    paf_noise_std: float = 0.05
    action_on: float = 0.8
    action_off: float = 0.1
    action_noise_std: float = 0.0
    segment_len: tuple[int, int] = (20, 60)
    interaction_prob: float = 0.5
    # corruption
    miss_prob: float = 0.0
    fp_rate: float = 0.0
    fp_near_prob: float = 0.0
    bbox_jitter_std: float = 0.0
    true_score_beta: tuple[float, float] = (8.0, 2.0)
    false_score_beta: tuple[float, float] = (2.0, 5.0)

    def __post_init__(self):
        for name in ("class_names", "base_classes", "interaction_classes", "box_width", "aspect",
                     "segment_len", "true_score_beta", "false_score_beta"):
            setattr(self, name, tuple(getattr(self, name)))
        for name in ("miss_prob", "fp_near_prob", "interaction_prob", "min_span_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        for name in ("speed_std", "jitter_std", "scale_drift_std", "camera_shake_std",
                     "appearance_noise_std", "paf_noise_std", "action_noise_std",
                     "bbox_jitter_std", "fp_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        if self.n_identities < 0:
            raise ValueError("n_identities must be >= 0")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def dataset_config(self) -> DatasetConfig:
        return DatasetConfig(
            appearance_dim=self.appearance_dim,
            paf_rgb_dim=self.paf_rgb_dim,
            paf_flow_dim=self.paf_flow_dim,
            class_names=self.class_names,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = cls.__dataclass_fields__
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def noiseless(cls, **kw) -> "ScenarioConfig":
        base = dict(
            appearance_noise_std=0.0, paf_noise_std=0.0, action_noise_std=0.0,
            miss_prob=0.0, fp_rate=0.0, bbox_jitter_std=0.0, jitter_std=0.0,
            camera_shake_std=0.0, scale_drift_std=0.0, true_score_beta=(1.0, 0.0),
        )
        base.update(kw)
        return cls(**base)


@dataclass
class Scenario:
    config: ScenarioConfig
    gt_observations: list[Observation]
    gt_trajectories: list[Trajectory]
    gt_labels: list[frozenset[int]]
    detections: list[Observation]
    det_source: list[int]  # gt observation index per detection, -1 for clutter
    scripts: dict[int, list[tuple[int, int, frozenset[int]]]] = field(default_factory=dict)

    @property
    def header(self) -> DatasetConfig:
        return self.config.dataset_config()

    def gt_rows(self) -> list[TrackRow]:
        rows = []
        for t in self.gt_trajectories:
            for m, f in zip(t.members, t.frames):
                rows.append(TrackRow(f, t.id, self.gt_observations[m].bbox, self.gt_labels[m]))
        rows.sort(key=lambda r: (r.frame, r.id))
        return rows


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        v = np.zeros_like(v)
        v[0] = 1.0
        return v
    return v / n


def _noisy(anchor: np.ndarray, std: float, rng: np.random.Generator) -> np.ndarray:
    return _unit(anchor + std * rng.standard_normal(anchor.size))


def _script(cfg: ScenarioConfig, start: int, end: int, rng: np.random.Generator):
    segs = []
    f = start
    lo, hi = cfg.segment_len
    while f < end:
        length = int(rng.integers(lo, hi + 1))
        base = int(cfg.base_classes[rng.integers(len(cfg.base_classes))]) if cfg.base_classes else None
        extra_draw = rng.random()
        extra = int(cfg.interaction_classes[rng.integers(len(cfg.interaction_classes))]) if cfg.interaction_classes else None
        labels = set()
        if base is not None:
            labels.add(base)
        if extra is not None and extra_draw < cfg.interaction_prob:
            labels.add(extra)
        segs.append((f, min(end, f + length), frozenset(labels)))
        f += length
    return segs


def _labels_at(script, frame: int) -> frozenset[int]:
    for a, b, labels in script:
        if a <= frame < b:
            return labels
    return frozenset()


def _paf(labels, rgb_anchors, flow_anchors, std, rng, fallback):
    if labels:
        ks = sorted(labels)
        rgb_a = _unit(rgb_anchors[ks].sum(axis=0))
        flow_a = _unit(flow_anchors[ks].sum(axis=0))
    else:
        rgb_a, flow_a = fallback
    return np.concatenate([_noisy(rgb_a, std, rng), _noisy(flow_a, std, rng)])


def _clip_box(x, y, w, h, cfg: ScenarioConfig) -> BBox | None:
    x1, y1 = max(x, 0.0), max(y, 0.0)
    x2, y2 = min(x + w, cfg.image_w), min(y + h, cfg.image_h)
    if x2 - x1 < 1.0 or y2 - y1 < 1.0:
        return None
    return BBox(float(x1), float(y1), float(x2 - x1), float(y2 - y1))


def _beta_score(params, rng: np.random.Generator) -> float:
    # Beta(a, 0) is read as a point mass at 1; a draw is still consumed
    a, b = params
    u = float(rng.beta(a, b if b > 0 else 1.0))
    return 1.0 if b == 0 else u


def _start_range(size: float, extent: float) -> tuple[float, float]:
    # one box-size margin from each border; centred if the image is too small
    if extent - size < size:
        return extent / 2, extent / 2
    return size, extent - size


def _reflect(p: float, v: float, lo: float, hi: float) -> tuple[float, float]:
    if p < lo:
        return 2 * lo - p, -v
    if p > hi:
        return 2 * hi - p, -v
    return p, v


def generate_scenario(cfg: ScenarioConfig) -> Scenario:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    C = cfg.n_classes
    rgb_anchors = np.zeros((C, cfg.paf_rgb_dim))
    flow_anchors = np.zeros((C, cfg.paf_flow_dim))
    for c in range(C):
        rgb_anchors[c] = _unit(rng.standard_normal(cfg.paf_rgb_dim))
        flow_anchors[c] = _unit(rng.standard_normal(cfg.paf_flow_dim))
    neutral = (_unit(np.ones(cfg.paf_rgb_dim)), _unit(np.ones(cfg.paf_flow_dim)))

    ids = []
    for k in range(cfg.n_identities):
        span = max(1, int(math.ceil(cfg.n_frames * (cfg.min_span_fraction + (1 - cfg.min_span_fraction) * rng.random()))))
        start = int(rng.integers(0, cfg.n_frames - span + 1))
        w = rng.uniform(*cfg.box_width)
        h = w * rng.uniform(*cfg.aspect)
        cx = rng.uniform(*_start_range(w, cfg.image_w))
        cy = rng.uniform(*_start_range(h, cfg.image_h))
        vel = cfg.speed_std * rng.standard_normal(2)
        anchor = _unit(rng.standard_normal(cfg.appearance_dim))
        script = _script(cfg, start, start + span, rng)
        ids.append(dict(id=k + 1, start=start, end=start + span, c=np.array([cx, cy]), v=vel,
                        w=w, h=h, anchor=anchor, script=script))

    gt_obs: list[Observation] = []
    gt_labels: list[frozenset[int]] = []
    members: dict[int, list[int]] = {d["id"]: [] for d in ids}
    frame_boxes: list[list[int]] = []
    for f in range(cfg.n_frames):
        shake = cfg.camera_shake_std * rng.standard_normal(2)
        here = []
        for d in ids:
            if not d["start"] <= f < d["end"]:
                continue
            jit = cfg.jitter_std * rng.standard_normal(2)
            scale = math.exp(cfg.scale_drift_std * rng.standard_normal())
            if f > d["start"]:
                d["c"] = d["c"] + d["v"] + jit
                d["w"] = float(np.clip(d["w"] * scale, 8.0, cfg.image_w / 4))
                d["h"] = float(np.clip(d["h"] * scale, 16.0, cfg.image_h / 2))
            cx, vx = _reflect(d["c"][0], d["v"][0], 0.0, cfg.image_w)
            cy, vy = _reflect(d["c"][1], d["v"][1], 0.0, cfg.image_h)
            d["c"], d["v"] = np.array([cx, cy]), np.array([vx, vy])
            app = _noisy(d["anchor"], cfg.appearance_noise_std, rng)
            labels = _labels_at(d["script"], f)
            paf = _paf(labels, rgb_anchors, flow_anchors, cfg.paf_noise_std, rng, neutral)
            acts = np.array([cfg.action_on if c in labels else cfg.action_off for c in range(C)])
            acts = np.clip(acts + cfg.action_noise_std * rng.standard_normal(C), 0.0, 1.0)
            box = _clip_box(cx + shake[0] - d["w"] / 2, cy + shake[1] - d["h"] / 2, d["w"], d["h"], cfg)
            if box is None:
                continue
            members[d["id"]].append(len(gt_obs))
            here.append(len(gt_obs))
            gt_obs.append(Observation(f, box, 1.0, app, paf, acts))
            gt_labels.append(labels)
        frame_boxes.append(here)

    detections: list[Observation] = []
    det_source: list[int] = []
    slots = max(1, math.ceil(cfg.fp_rate))
    for f in range(cfg.n_frames):
        for gi in frame_boxes[f]:
            g = gt_obs[gi]
            missed = rng.random() < cfg.miss_prob
            jit = cfg.bbox_jitter_std * rng.standard_normal(4)
            score = _beta_score(cfg.true_score_beta, rng)
            if missed:
                continue
            b = g.bbox
            box = _clip_box(b.x + jit[0], b.y + jit[1], b.w + jit[2], b.h + jit[3], cfg) if cfg.bbox_jitter_std else b
            if box is None:
                continue
            detections.append(Observation(f, box, score, g.appearance, g.paf, g.action_scores))
            det_source.append(gi)
        n_fp = int(rng.binomial(slots, min(1.0, cfg.fp_rate / slots)))
        for _ in range(n_fp):
            near = rng.random() < cfg.fp_near_prob
            u = rng.random(5)
            if near and frame_boxes[f]:
                # spurious box overlapping a real person (double detection)
                ref = gt_obs[frame_boxes[f][int(u[0] * len(frame_boxes[f])) % len(frame_boxes[f])]].bbox
                w = ref.w * (0.8 + 0.4 * u[3])
                h = ref.h * (0.8 + 0.4 * u[4])
                x = ref.x + (u[1] - 0.5) * 0.6 * ref.w
                y = ref.y + (u[2] - 0.5) * 0.6 * ref.h
            else:
                w = cfg.box_width[0] + u[3] * (cfg.box_width[1] - cfg.box_width[0])
                h = w * (cfg.aspect[0] + u[4] * (cfg.aspect[1] - cfg.aspect[0]))
                x = u[1] * (cfg.image_w - w)
                y = u[2] * (cfg.image_h - h)
            app = _unit(rng.standard_normal(cfg.appearance_dim))
            rgb = _unit(rng.standard_normal(cfg.paf_rgb_dim))
            flow = _unit(rng.standard_normal(cfg.paf_flow_dim))
            acts = rng.random(C) * cfg.action_on
            score = _beta_score(cfg.false_score_beta, rng)
            box = _clip_box(x, y, w, h, cfg)
            if box is None:
                continue
            detections.append(Observation(f, box, score, app, np.concatenate([rgb, flow]), acts))
            det_source.append(-1)

    trajs = [
        Trajectory.from_members(tid, ms, gt_obs) for tid, ms in members.items() if ms
    ]
    scripts = {d["id"]: d["script"] for d in ids}
    return Scenario(cfg, gt_obs, trajs, gt_labels, detections, det_source, scripts)


def scenario_stats(sc: Scenario) -> dict:
    per_class = [0] * sc.config.n_classes
    for labels in sc.gt_labels:
        for c in labels:
            per_class[c] += 1
    n_clutter = sum(1 for s in sc.det_source if s < 0)
    n_det = len(sc.detections)
    return {
        "gt_boxes": len(sc.gt_observations),
        "identities": len(sc.gt_trajectories),
        "detections": n_det,
        "true_detections": n_det - n_clutter,
        "clutter": n_clutter,
        "clutter_ratio": n_clutter / n_det if n_det else 0.0,
        "per_class_frames": per_class,
    }


def frames_of(observations: Sequence[Observation]) -> list[int]:
    return sorted({o.frame for o in observations})
