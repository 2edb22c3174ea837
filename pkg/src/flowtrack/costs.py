"""Association costs: observation, transition, entry and exit.

The observation cost is the negative log-odds of a logistic model of the
detector score; its parameters are fitted by Fisher scoring (IRLS).  The
transition cost is ``-log(sigmoid(q))`` where ``q`` is the output of a boosted
tree ensemble over cue distances (see :mod:`flowtrack.trees`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import iou
from .model import Observation, ValidationError
from .trees import TreeEnsemble

MODEL_VERSION = 1
PROB_CLAMP = 1e-12


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LogisticParams:
    alpha: float = 0.0
    beta: float = 0.0
    bias: float = -2.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.alpha, self.beta, self.bias)):
            raise ValidationError("logistic parameters must be finite")


@dataclass(frozen=True)
class CueVector:
    c_iou: float
    c_app: float
    c_paf: float

    def __post_init__(self):
        if not 0.0 <= self.c_iou <= 1.0:
            raise ValidationError(f"c_iou {self.c_iou} outside [0, 1]")
        for name in ("c_app", "c_paf"):
            v = getattr(self, name)
            if not 0.0 <= v <= 2.0:
                raise ValidationError(f"{name} {v} outside [0, 2]")

    def as_array(self) -> np.ndarray:
        return np.array([self.c_iou, self.c_app, self.c_paf])


@dataclass(frozen=True)
class AssociationCosts:
    logistic: LogisticParams = field(default_factory=LogisticParams)
    ensemble: TreeEnsemble = field(default_factory=TreeEnsemble)
    c_entr: float = 10.0
    c_exit: float = 10.0

    def __post_init__(self):
        if not (math.isfinite(self.c_entr) and math.isfinite(self.c_exit)):
            raise ValidationError("entry/exit costs must be finite")


def cosine_distance(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValidationError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValidationError("cosine distance of a zero-norm vector")
    d = 1.0 - float(np.dot(u, v)) / (nu * nv)
    return min(2.0, max(0.0, d))


def cue_vector(a: Observation, b: Observation) -> CueVector:
    if not a.frame < b.frame:
        raise ValidationError(f"cue vector needs frame order, got {a.frame} -> {b.frame}")
    return CueVector(
        iou(a.bbox, b.bbox),
        cosine_distance(a.appearance, b.appearance),
        cosine_distance(a.paf, b.paf),
    )


def unit_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValidationError("cosine distance of a zero-norm vector")
    return mat / norms


def observation_cost(det_score: float, p: LogisticParams) -> float:
    """Negative log-odds ``-log(p / (1 - p))`` of the logistic detection model.

    With ``p = 1 / (1 + exp(z))`` this is exactly ``z = b + alpha + beta * c``,
    which is what we return; forming ``p`` first only loses precision.
    """
    return p.bias + p.alpha + p.beta * det_score


def observation_cost_via_probability(det_score: float, p: LogisticParams) -> float:
    # reference form, kept for cross-checking the identity
    z = p.bias + p.alpha + p.beta * det_score
    prob = 1.0 / (1.0 + math.exp(z)) if z < 700 else 0.0
    prob = min(max(prob, PROB_CLAMP), 1.0 - PROB_CLAMP)
    return -math.log(prob / (1.0 - prob))


@dataclass(frozen=True)
class FitOptions:
    ridge: float = 1e-6
    tol: float = 1e-8
    max_iter: int = 100


def fit_observation_cost(samples, bias: float = -2.0, opts: FitOptions | None = None) -> LogisticParams:
    """Fit ``alpha``, ``beta`` by Fisher scoring with ``bias`` held fixed.

    ``samples`` are ``(det_score, label)`` pairs; label 1 marks a true
    detection, which the model maps to a high probability ``p``.
    """
    opts = opts or FitOptions()
    data = np.asarray(samples, dtype=float).reshape(-1, 2)
    if data.shape[0] < 2:
        raise ValidationError("need at least two samples")
    c, y = data[:, 0], data[:, 1]
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("labels must be 0 or 1")
    if y.min() == y.max():
        raise ValidationError("single-class input: both labels must be present")

    # linear predictor of log-odds(label=1) is -bias + theta0 + theta1 * c
    # with theta = (-alpha, -beta)
    X = np.column_stack([np.ones_like(c), c])
    offset = -bias
    theta = np.zeros(2)
    for _ in range(opts.max_iter):
        eta = offset + X @ theta
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = mu * (1.0 - mu)
        grad = X.T @ (y - mu) - opts.ridge * theta
        info = (X * w[:, None]).T @ X + opts.ridge * np.eye(2)
        step = np.linalg.solve(info, grad)
        theta = theta + step
        if np.max(np.abs(step)) < opts.tol:
            return LogisticParams(alpha=float(-theta[0]), beta=float(-theta[1]), bias=bias)
    raise ConvergenceError(f"Fisher scoring did not converge in {opts.max_iter} iterations")


def transition_cost_from_score(q):
    """``-log(sigmoid(q))`` with the sigmoid clamped to ``[1e-12, 1 - 1e-12]``."""
    lo = -math.log1p(-PROB_CLAMP)
    hi = -math.log(PROB_CLAMP)
    return np.clip(np.logaddexp(0.0, -np.asarray(q, dtype=float)), lo, hi)


def transition_score(c: CueVector, e: TreeEnsemble) -> float:
    return float(e.predict(c.as_array()[None, :])[0])


def transition_cost(c: CueVector, e: TreeEnsemble) -> float:
    return float(transition_cost_from_score(transition_score(c, e)))


# --- serialization -----------------------------------------------------------

def costs_to_dict(costs: AssociationCosts) -> dict:
    return {
        "version": MODEL_VERSION,
        "logistic": {
            "alpha": costs.logistic.alpha,
            "beta": costs.logistic.beta,
            "bias": costs.logistic.bias,
        },
        "ensemble": costs.ensemble.to_dict(),
        "c_entr": costs.c_entr,
        "c_exit": costs.c_exit,
    }


def costs_from_dict(d: dict) -> AssociationCosts:
    if d.get("version") != MODEL_VERSION:
        raise ValidationError(f"unsupported cost model version {d.get('version')!r}")
    lg = d["logistic"]
    return AssociationCosts(
        logistic=LogisticParams(float(lg["alpha"]), float(lg["beta"]), float(lg["bias"])),
        ensemble=TreeEnsemble.from_dict(d["ensemble"]),
        c_entr=float(d["c_entr"]),
        c_exit=float(d["c_exit"]),
    )


def dumps_costs(costs: AssociationCosts) -> str:
    # json emits the shortest repr that round-trips every finite double
    return json.dumps(costs_to_dict(costs), indent=1, sort_keys=True, allow_nan=False)


def loads_costs(text: str) -> AssociationCosts:
    return costs_from_dict(json.loads(text))


def with_overrides(costs: AssociationCosts, *, c_entr=None, c_exit=None, bias=None) -> AssociationCosts:
    lg = costs.logistic
    if bias is not None:
        lg = LogisticParams(lg.alpha, lg.beta, bias)
    return AssociationCosts(
        logistic=lg,
        ensemble=costs.ensemble,
        c_entr=costs.c_entr if c_entr is None else c_entr,
        c_exit=costs.c_exit if c_exit is None else c_exit,
    )


def detection_labels(observations: Sequence[Observation], gt_rows, iou_thresh: float = 0.5):
    """Label each detection 1 if it overlaps some same-frame gt box at ``iou_thresh``."""
    by_frame: dict[int, list] = {}
    for r in gt_rows:
        by_frame.setdefault(r.frame, []).append(r.bbox)
    labels = []
    for o in observations:
        best = max((iou(o.bbox, g) for g in by_frame.get(o.frame, ())), default=0.0)
        labels.append(1 if best >= iou_thresh else 0)
    return labels


def pair_cues(observations: Sequence[Observation], src, dst, paf_constant: float | None = None) -> np.ndarray:
    """Cue rows ``(c_iou, c_app, c_paf)`` for index pairs ``src[k] -> dst[k]``.

    ``paf_constant`` replaces the PAF channel with a fixed value (cue ablation).
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    out = np.zeros((src.size, 3))
    if src.size == 0:
        return out
    boxes = np.array([o.bbox.as_list() for o in observations])
    a, b = boxes[src], boxes[dst]
    iw = np.minimum(a[:, 0] + a[:, 2], b[:, 0] + b[:, 2]) - np.maximum(a[:, 0], b[:, 0])
    ih = np.minimum(a[:, 1] + a[:, 3], b[:, 1] + b[:, 3]) - np.maximum(a[:, 1], b[:, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = a[:, 2] * a[:, 3] + b[:, 2] * b[:, 3] - inter
    out[:, 0] = np.minimum(1.0, inter / union)
    out[np.all(a == b, axis=1), 0] = 1.0
    app = unit_rows(np.array([o.appearance for o in observations]))
    out[:, 1] = np.clip(1.0 - np.einsum("ij,ij->i", app[src], app[dst]), 0.0, 2.0)
    if paf_constant is None:
        paf = unit_rows(np.array([o.paf for o in observations]))
        out[:, 2] = np.clip(1.0 - np.einsum("ij,ij->i", paf[src], paf[dst]), 0.0, 2.0)
    else:
        out[:, 2] = paf_constant
    return out


def build_training_pairs(
    gt,
    observations: Sequence[Observation],
    max_gap: int,
    neg_ratio: float = 3.0,
    seed: int = 0,
    paf_constant: float | None = None,
) -> list[tuple[CueVector, int]]:
    """Labelled cue vectors for training the transition model.

    Positives link consecutive members of one trajectory within ``max_gap``
    frames; negatives link members of different trajectories within the same
    window, subsampled (seeded) to at most ``neg_ratio`` per positive.  Pass
    clutter detections as singleton trajectories to include them as negatives.
    """
    pos_src, pos_dst = [], []
    owner = {}
    for t in gt:
        for a, b, fa, fb in zip(t.members, t.members[1:], t.frames, t.frames[1:]):
            if fb - fa <= max_gap:
                pos_src.append(a)
                pos_dst.append(b)
        for m in t.members:
            owner[m] = t.id
    members = sorted(owner, key=lambda m: (observations[m].frame, m))
    frames = np.array([observations[m].frame for m in members], dtype=np.int64)
    ids = np.array([owner[m] for m in members], dtype=np.int64)
    neg_src, neg_dst = [], []
    for k, m in enumerate(members):
        lo = np.searchsorted(frames, frames[k] + 1, side="left")
        hi = np.searchsorted(frames, frames[k] + max_gap, side="right")
        cand = np.arange(lo, hi)
        cand = cand[ids[cand] != ids[k]]
        neg_src.extend([m] * cand.size)
        neg_dst.extend(members[c] for c in cand)
    if not pos_src and not neg_src:
        raise ValidationError("no training pairs available")
    cap = int(neg_ratio * max(len(pos_src), 1))
    if len(neg_src) > cap:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(neg_src), size=cap, replace=False))
        neg_src = [neg_src[i] for i in keep]
        neg_dst = [neg_dst[i] for i in keep]
    src = pos_src + neg_src
    dst = pos_dst + neg_dst
    cues = pair_cues(observations, src, dst, paf_constant)
    labels = [1] * len(pos_src) + [0] * len(neg_src)
    return [(CueVector(*row), lbl) for row, lbl in zip(cues.tolist(), labels)]
