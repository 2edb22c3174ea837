"""Gradient-boosted regression trees for the transition score.

Trees are stored as nested nodes (``Node``) for serialization and compiled to
flat arrays for batched evaluation.  A sample goes left when
``x[feature] < threshold``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
import numpy as np

N_FEATURES = 3


@dataclass(frozen=True)
class Node:
    feature: int = -1
    threshold: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Node":
        if "leaf" in d:
            return cls(value=float(d["leaf"]))
        return cls(
            feature=int(d["feature"]),
            threshold=float(d["threshold"]),
            left=cls.from_dict(d["left"]),
            right=cls.from_dict(d["right"]),
        )

    def evaluate(self, x) -> float:
        node = self
        while not node.is_leaf:
            node = node.left if x[node.feature] < node.threshold else node.right
        return node.value


def leaf(value: float) -> Node:
    return Node(value=value)


def split(feature: int, threshold: float, left: Node, right: Node) -> Node:
    return Node(feature=feature, threshold=threshold, left=left, right=right)


@dataclass(frozen=True)
class TreeEnsemble:
    trees: tuple[Node, ...] = ()
    shrinkage: float = 1.0
    base_score: float = 0.0
    max_depth: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if not 0.0 < self.shrinkage <= 1.0:
            raise ValueError(f"shrinkage must be in (0, 1], got {self.shrinkage}")
        for t in self.trees:
            _check_tree(t)
            if self.max_depth is not None and t.depth() > self.max_depth:
                raise ValueError(f"tree depth {t.depth()} exceeds max depth {self.max_depth}")

    @cached_property
    def _flat(self):
        feat, thr, left, right, val, roots = [], [], [], [], [], []

        def add(node: Node) -> int:
            k = len(feat)
            feat.append(node.feature if not node.is_leaf else -1)
            thr.append(node.threshold)
            left.append(-1)
            right.append(-1)
            val.append(node.value)
            if not node.is_leaf:
                left[k] = add(node.left)
                right[k] = add(node.right)
            return k

        for t in self.trees:
            roots.append(add(t))
        depth = max((t.depth() for t in self.trees), default=0)
        return (
            np.array(feat, dtype=np.int64),
            np.array(thr, dtype=float),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(val, dtype=float),
            np.array(roots, dtype=np.int64),
            depth,
        )

    def predict(self, X) -> np.ndarray:
        """Scores ``base_score + shrinkage * sum(tree(x))`` for each row of ``X``."""
        X = np.asarray(X, dtype=float).reshape(-1, N_FEATURES)
        out = np.full(X.shape[0], self.base_score, dtype=float)
        if not self.trees or X.shape[0] == 0:
            return out
        total = np.zeros(X.shape[0])
        for k in range(len(self.trees)):
            total += self._walk(X, k)
        return out + self.shrinkage * total

    def tree_outputs(self, X) -> np.ndarray:
        """Leaf value reached in every tree, shape ``(n_samples, n_trees)``."""
        X = np.asarray(X, dtype=float).reshape(-1, N_FEATURES)
        return np.column_stack([self._walk(X, k) for k in range(len(self.trees))])

    def _walk(self, X: np.ndarray, k: int) -> np.ndarray:
        feat, thr, left, right, val, roots, depth = self._flat
        idx = np.full(X.shape[0], roots[k], dtype=np.int64)
        rows = np.arange(X.shape[0])
        for _ in range(depth):
            f = feat[idx]
            internal = f >= 0
            if not internal.any():
                break
            go_left = X[rows, np.where(internal, f, 0)] < thr[idx]
            idx = np.where(internal, np.where(go_left, left[idx], right[idx]), idx)
        return val[idx]

    def to_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "shrinkage": self.shrinkage,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsemble":
        return cls(
            trees=tuple(Node.from_dict(t) for t in d.get("trees", ())),
            shrinkage=float(d.get("shrinkage", 1.0)),
            base_score=float(d.get("base_score", 0.0)),
        )


def _check_tree(node: Node) -> None:
    if node.is_leaf:
        if node.right is not None:
            raise ValueError("node has a right child but no left child")
        return
    if node.right is None or node.feature not in range(N_FEATURES):
        raise ValueError(f"invalid split node (feature={node.feature})")
    _check_tree(node.left)
    _check_tree(node.right)


@dataclass(frozen=True)
class BoostOptions:
    n_trees: int = 100
    max_depth: int = 3
    shrinkage: float = 0.1
    min_samples_leaf: int = 5


@dataclass
class BoostResult:
    ensemble: TreeEnsemble
    losses: list[float] = field(default_factory=list)


def logistic_loss(y: np.ndarray, score: np.ndarray) -> float:
    """Mean negative log-likelihood of labels ``y`` under ``sigmoid(score)``."""
    return float(np.mean(np.logaddexp(0.0, score) - y * score))


def _as_xy(pairs):
    if len(pairs) == 0:
        raise ValueError("no training pairs")
    X = np.array([c.as_array() if hasattr(c, "as_array") else np.asarray(c, float) for c, _ in pairs])
    y = np.array([float(lbl) for _, lbl in pairs])
    return X.reshape(-1, N_FEATURES), y


def fit_transition_model(pairs, opts: BoostOptions | None = None) -> TreeEnsemble:
    return boost(pairs, opts).ensemble


def boost(pairs, opts: BoostOptions | None = None) -> BoostResult:
    """Logistic-loss gradient boosting (Friedman's TreeBoost).

    Each round fits a least-squares regression tree to the residual
    ``y - sigmoid(F)`` and sets every leaf to the one-step Newton value
    ``sum(r) / sum(p (1 - p))``.  If a shrunken round would raise the training
    loss its step is halved until it does not, so ``losses`` never increases.
    """
    opts = opts or BoostOptions()
    X, y = _as_xy(pairs)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    pos = y.mean()
    if pos in (0.0, 1.0):
        raise ValueError("single-class input: both labels must be present")
    base = math.log(pos / (1.0 - pos))
    F = np.full(y.shape, base)
    losses = [logistic_loss(y, F)]
    trees = []
    order = [np.argsort(X[:, k], kind="stable") for k in range(N_FEATURES)]
    for _ in range(opts.n_trees):
        p = 1.0 / (1.0 + np.exp(-F))
        r = y - p
        h = p * (1.0 - p)
        tree = _grow(X, r, h, np.ones(len(y), dtype=bool), order, opts, 0)
        step_scale = 1.0
        delta = _tree_eval(tree, X)
        for _halving in range(40):
            F_new = F + opts.shrinkage * step_scale * delta
            loss = logistic_loss(y, F_new)
            if loss <= losses[-1]:
                break
            step_scale *= 0.5
        else:
            F_new, loss = F, losses[-1]
            step_scale = 0.0
        if step_scale != 1.0:
            tree = _scale_tree(tree, step_scale)
        trees.append(tree)
        F = F_new
        losses.append(loss)
    ens = TreeEnsemble(tuple(trees), shrinkage=opts.shrinkage, base_score=base, max_depth=opts.max_depth)
    return BoostResult(ens, losses)


def _tree_eval(tree: Node, X: np.ndarray) -> np.ndarray:
    return TreeEnsemble((tree,)).predict(X)


def _scale_tree(node: Node, s: float) -> Node:
    if node.is_leaf:
        return leaf(node.value * s)
    return split(node.feature, node.threshold, _scale_tree(node.left, s), _scale_tree(node.right, s))


def _newton_leaf(r: np.ndarray, h: np.ndarray) -> float:
    den = h.sum()
    if den < 1e-12:
        den = 1e-12
    return float(r.sum() / den)


def _grow(X, r, h, mask, order, opts: BoostOptions, depth: int) -> Node:
    n = int(mask.sum())
    if depth >= opts.max_depth or n < 2 * opts.min_samples_leaf:
        return leaf(_newton_leaf(r[mask], h[mask]))
    best = None  # (gain, feature, threshold)
    total = r[mask].sum()
    for k in range(N_FEATURES):
        idx = order[k][mask[order[k]]]
        xs = X[idx, k]
        rs = r[idx]
        csum = np.cumsum(rs)
        # candidate split after position i (left = idx[:i+1])
        nl = np.arange(1, n)
        ok = (nl >= opts.min_samples_leaf) & (n - nl >= opts.min_samples_leaf) & (xs[1:] > xs[:-1])
        if not ok.any():
            continue
        sl = csum[:-1]
        sr = total - sl
        gain = sl**2 / nl + sr**2 / (n - nl) - total**2 / n
        gain = np.where(ok, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > 1e-15 and (best is None or gain[i] > best[0]):
            thr = 0.5 * (xs[i] + xs[i + 1])
            if thr <= xs[i]:
                thr = xs[i + 1]
            best = (float(gain[i]), k, float(thr))
    if best is None:
        return leaf(_newton_leaf(r[mask], h[mask]))
    _, k, thr = best
    go_left = X[:, k] < thr
    return split(
        k,
        thr,
        _grow(X, r, h, mask & go_left, order, opts, depth + 1),
        _grow(X, r, h, mask & ~go_left, order, opts, depth + 1),
    )


def stump(feature: int, threshold: float, lo: float, hi: float) -> Node:
    return split(feature, threshold, leaf(lo), leaf(hi))
