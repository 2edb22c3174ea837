"""Domain types shared across the tracker.

All types are frozen dataclasses; vectors are stored as read-only numpy
arrays so observations can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

OKUTAMA_CLASSES = (
    "handshaking",
    "hugging",
    "reading",
    "drinking",
    "pushing/pulling",
    "carrying",
    "calling",
    "running",
    "walking",
    "lying",
    "sitting",
    "standing",
)


class ValidationError(ValueError):
    """Raised when a record violates a domain invariant."""


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError(f"non-finite box coordinates {vals}")
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(f"non-positive box size w={self.w} h={self.h}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class DatasetConfig:
    """Per-dataset dimensions; mirrors the detections file header."""

    appearance_dim: int = 128
    paf_rgb_dim: int = 2048
    paf_flow_dim: int = 2048
    class_names: tuple[str, ...] = OKUTAMA_CLASSES
    fps: float = 30.0

    def __post_init__(self):
        if min(self.appearance_dim, self.paf_rgb_dim, self.paf_flow_dim) <= 0:
            raise ValidationError("feature dimensions must be positive")
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def paf_dim(self) -> int:
        return self.paf_rgb_dim + self.paf_flow_dim

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def _frozen_vector(v) -> np.ndarray:
    arr = np.array(v, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Observation:
    """One detection: frame, box, detector score and its cue vectors."""

    frame: int
    bbox: BBox
    det_score: float
    appearance: np.ndarray
    paf: np.ndarray
    action_scores: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "appearance", _frozen_vector(self.appearance))
        object.__setattr__(self, "paf", _frozen_vector(self.paf))
        object.__setattr__(self, "action_scores", _frozen_vector(self.action_scores))

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return (
            self.frame == other.frame
            and self.bbox == other.bbox
            and self.det_score == other.det_score
            and np.array_equal(self.appearance, other.appearance)
            and np.array_equal(self.paf, other.paf)
            and np.array_equal(self.action_scores, other.action_scores)
        )

    __hash__ = None


def validate_observation(obs: Observation, config: DatasetConfig) -> Observation:
    """Check ``obs`` against the dataset dimensions; return it unchanged."""
    if not isinstance(obs.frame, (int, np.integer)) or obs.frame < 0:
        raise ValidationError(f"frame must be a non-negative integer, got {obs.frame!r}")
    if not math.isfinite(obs.det_score):
        raise ValidationError("non-finite detector score")
    if not 0.0 <= obs.det_score <= 1.0:
        raise ValidationError(f"detector score {obs.det_score} outside [0, 1]")
    checks = (
        ("appearance", obs.appearance, config.appearance_dim),
        ("paf", obs.paf, config.paf_dim),
        ("action_scores", obs.action_scores, config.n_classes),
    )
    for name, vec, dim in checks:
        if vec.ndim != 1 or vec.shape[0] != dim:
            raise ValidationError(
                f"dimension mismatch: {name} has length {vec.size}, expected {dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise ValidationError(f"non-finite value in {name}")
    if np.any(obs.action_scores < 0) or np.any(obs.action_scores > 1):
        raise ValidationError("action scores must lie in [0, 1]")
    return obs


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered observation indices under one identity."""

    id: int
    members: tuple[int, ...] = ()
    frames: tuple[int, ...] = ()

    def __post_init__(self):
        if self.id < 1:
            raise ValidationError(f"trajectory id must be >= 1, got {self.id}")
        object.__setattr__(self, "members", tuple(int(m) for m in self.members))
        object.__setattr__(self, "frames", tuple(int(f) for f in self.frames))
        if len(self.members) != len(self.frames):
            raise ValidationError("members and frames differ in length")
        if any(b <= a for a, b in zip(self.frames, self.frames[1:])):
            raise ValidationError("trajectory frames must be strictly increasing")

    def __len__(self):
        return len(self.members)

    @classmethod
    def from_members(cls, id: int, members: Sequence[int], observations: Sequence[Observation]):
        return cls(id, tuple(members), tuple(observations[m].frame for m in members))


def trajectory_push(traj: Trajectory, idx: int, frame: int) -> Trajectory:
    """Return ``traj`` with ``idx`` appended at ``frame``."""
    if traj.frames and frame <= traj.frames[-1]:
        raise ValidationError(
            f"frame {frame} does not follow last member frame {traj.frames[-1]}"
        )
    return Trajectory(traj.id, traj.members + (idx,), traj.frames + (frame,))


def check_non_overlap(trajectories: Sequence[Trajectory]) -> None:
    seen: set[int] = set()
    for t in trajectories:
        for m in t.members:
            if m in seen:
                raise ValidationError(f"observation {m} appears in more than one trajectory")
            seen.add(m)


@dataclass(frozen=True)
class TrackRow:
    """One box of a box-level tracking result (ground truth or hypothesis).

    ``scores`` optionally carries a per-label confidence parallel to ``labels``.
    """

    frame: int
    id: int
    bbox: BBox
    labels: frozenset[int] = frozenset()
    scores: tuple[tuple[int, float], ...] = ()

    def score_of(self, c: int) -> float:
        for k, s in self.scores:
            if k == c:
                return s
        return 1.0


def trajectories_to_rows(
    trajectories: Sequence[Trajectory],
    observations: Sequence[Observation],
    timeline=None,
) -> list[TrackRow]:
    """Flatten trajectories into rows sorted by (frame, id)."""
    rows = []
    for t in trajectories:
        for m, f in zip(t.members, t.frames):
            labels: frozenset[int] = frozenset()
            scores: tuple = ()
            if timeline is not None:
                labels = timeline.labels.get((t.id, f), frozenset())
                vec = timeline.scores.get((t.id, f))
                if vec is not None:
                    scores = tuple((c, float(vec[c])) for c in sorted(labels))
            rows.append(TrackRow(f, t.id, observations[m].bbox, labels, scores))
    rows.sort(key=lambda r: (r.frame, r.id))
    return rows
