"""Online association: per-frame Hungarian assignment with track birth/death."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .costs import AssociationCosts, observation_cost, pair_cues, transition_cost_from_score
from .model import Observation, Trajectory, ValidationError

FORBIDDEN = 1e9


def hungarian_solve(cost_matrix) -> list[tuple[int, int]]:
    """Minimum-cost assignment of ``min(n, m)`` row/column pairs.

    Shortest-augmenting-path Hungarian method with row/column potentials,
    O(n^2 m).  Rows are inserted in order and the first minimum wins, so ties
    resolve towards lower row, then lower column indices.
    """
    a = np.asarray(cost_matrix, dtype=float)
    if a.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    n, m = a.shape
    if n == 0 or m == 0:
        return []
    if not np.all(np.isfinite(a)):
        raise ValueError("cost matrix entries must be finite")
    if n > m:
        return sorted((r, c) for c, r in hungarian_solve(a.T))

    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)  # p[j]: row (1-based) assigned to column j; column 0 is virtual
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            row = a[i0 - 1]
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    return sorted((p[j] - 1, j - 1) for j in range(1, m + 1) if p[j])


@dataclass(frozen=True)
class OnlineConfig:
    gate: float = math.log(2.0)
    max_misses: int = 30

    def __post_init__(self):
        if self.max_misses < 0:
            raise ValidationError("max_misses must be >= 0")


@dataclass(frozen=True)
class ActiveTrack:
    id: int
    last_index: int
    last_obs: Observation
    misses: int = 0


@dataclass(frozen=True)
class OnlineState:
    tracks: tuple[ActiveTrack, ...] = ()
    next_id: int = 1
    config: OnlineConfig = field(default_factory=OnlineConfig)
    last_frame: int = -1


def step(
    state: OnlineState,
    frame_observations: Sequence[Observation],
    costs: AssociationCosts,
    indices: Sequence[int] | None = None,
) -> tuple[OnlineState, list[tuple[int, int]]]:
    """Advance the tracker by one frame.

    Returns the new state and ``(track id, observation index)`` pairs for every
    detection that joined a track (matched or newly born).  ``indices`` gives
    the global index of each detection; defaults to its position in the list.
    """
    dets = list(frame_observations)
    idx = list(range(len(dets))) if indices is None else list(indices)
    if len(idx) != len(dets):
        raise ValidationError("indices and observations differ in length")
    frames = {o.frame for o in dets}
    if len(frames) > 1:
        raise ValidationError(f"observations span several frames: {sorted(frames)}")
    frame = frames.pop() if frames else state.last_frame + 1
    if frame <= state.last_frame:
        raise ValidationError(f"frame {frame} does not follow frame {state.last_frame}")
    cfg = state.config

    # tracks whose gap already exceeds the miss budget cannot match this frame
    alive = [t for t in state.tracks if frame - t.last_obs.frame - 1 <= cfg.max_misses]

    matches: dict[int, int] = {}  # track position -> detection position
    if alive and dets:
        pool = [t.last_obs for t in alive] + dets
        src = np.repeat(np.arange(len(alive)), len(dets))
        dst = np.tile(np.arange(len(dets)), len(alive)) + len(alive)
        q = costs.ensemble.predict(pair_cues(pool, src, dst))
        cm = transition_cost_from_score(q).reshape(len(alive), len(dets))
        allowed = cm <= cfg.gate
        if allowed.any():
            for r, c in hungarian_solve(np.where(allowed, cm, FORBIDDEN)):
                if allowed[r, c]:
                    matches[r] = c

    new_tracks = []
    assigned: list[tuple[int, int]] = []
    for r, t in enumerate(alive):
        if r in matches:
            c = matches[r]
            new_tracks.append(ActiveTrack(t.id, idx[c], dets[c], 0))
            assigned.append((t.id, idx[c]))
        else:
            misses = frame - t.last_obs.frame
            if misses <= cfg.max_misses:
                new_tracks.append(replace(t, misses=misses))
    next_id = state.next_id
    taken = set(matches.values())
    for c, o in enumerate(dets):
        if c in taken:
            continue
        if observation_cost(o.det_score, costs.logistic) < 0:
            new_tracks.append(ActiveTrack(next_id, idx[c], o, 0))
            assigned.append((next_id, idx[c]))
            next_id += 1
    return OnlineState(tuple(new_tracks), next_id, cfg, frame), assigned


def track_online(
    observations: Sequence[Observation],
    costs: AssociationCosts,
    config: OnlineConfig | None = None,
) -> list[Trajectory]:
    """Run :func:`step` over every frame and collect trajectories by id."""
    state = OnlineState(config=config or OnlineConfig())
    by_frame: dict[int, list[int]] = defaultdict(list)
    for i, o in enumerate(observations):
        by_frame[o.frame].append(i)
    members: dict[int, list[int]] = defaultdict(list)
    for f in sorted(by_frame):
        ids = by_frame[f]
        state, assigned = step(state, [observations[i] for i in ids], costs, ids)
        for tid, i in assigned:
            members[tid].append(i)
    return [Trajectory.from_members(tid, members[tid], observations) for tid in sorted(members)]
