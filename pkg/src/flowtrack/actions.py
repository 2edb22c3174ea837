"""Multi-frame, multi-label action recognition along trajectories.

Per class, action scores are averaged over the trajectory members inside a
trailing window of ``lam`` frames, ``(t - lam, t]``; every class whose mean
reaches ``epsilon`` is reported.  An empty label set means "Unknown".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import OKUTAMA_CLASSES, Observation, Trajectory, ValidationError


@dataclass(frozen=True)
class RecognitionConfig:
    lam: int = 15
    epsilon: float = 0.4
    class_names: tuple[str, ...] = OKUTAMA_CLASSES

    def __post_init__(self):
        if self.lam < 1:
            raise ValidationError(f"window length must be >= 1, got {self.lam}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError(f"epsilon must be in [0, 1], got {self.epsilon}")
        object.__setattr__(self, "class_names", tuple(self.class_names))


@dataclass
class ActionTimeline:
    """Label sets and windowed scores keyed by ``(trajectory id, frame)``."""

    labels: dict[tuple[int, int], frozenset[int]] = field(default_factory=dict)
    scores: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def is_unknown(self, track_id: int, frame: int) -> bool:
        return not self.labels[(track_id, frame)]


def window_scores(traj: Trajectory, observations: Sequence[Observation], t: int, cfg: RecognitionConfig) -> np.ndarray:
    frames = np.asarray(traj.frames)
    pos = np.searchsorted(frames, t)
    if pos >= len(frames) or frames[pos] != t:
        raise ValidationError(f"frame {t} is not a member of trajectory {traj.id}")
    lo = np.searchsorted(frames, t - cfg.lam, side="right")
    window = [observations[m].action_scores for m in traj.members[lo : pos + 1]]
    return np.mean(window, axis=0)


def _trajectory_scores(traj: Trajectory, observations: Sequence[Observation], lam: int) -> np.ndarray:
    S = np.array([observations[m].action_scores for m in traj.members], dtype=float)
    frames = np.asarray(traj.frames)
    lo = np.searchsorted(frames, frames - lam, side="right")
    return np.array([S[a : k + 1].mean(axis=0) for k, a in enumerate(lo)])


def recognize_timeline(
    trajectories: Sequence[Trajectory],
    observations: Sequence[Observation],
    cfg: RecognitionConfig,
) -> ActionTimeline:
    tl = ActionTimeline()
    for traj in trajectories:
        if not traj.members:
            continue
        means = _trajectory_scores(traj, observations, cfg.lam)
        for f, row in zip(traj.frames, means):
            tl.scores[(traj.id, f)] = row
            tl.labels[(traj.id, f)] = frozenset(int(c) for c in np.flatnonzero(row >= cfg.epsilon))
    return tl


def label_names(labels, cfg: RecognitionConfig) -> list[str]:
    if not labels:
        return ["Unknown"]
    return [cfg.class_names[c] for c in sorted(labels)]
