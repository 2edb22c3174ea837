"""Offline data association as a min-cost flow.

Every observation ``i`` is split into ``u_i -> v_i`` (capacity 1, cost
``c_obsv(i)``).  Entry edges ``source -> u_i``, exit edges ``v_i -> sink`` and
transition edges ``v_i -> u_j`` (``0 < frame_j - frame_i <= max_gap``) carry
the remaining costs.  A unit of flow is one trajectory.

The solver is successive shortest paths: Bellman-Ford potentials on the
initial (acyclic) network absorb the negative observation costs, then each
augmentation runs Dijkstra on reduced costs.  Augmentation stops once the
cheapest source-sink path is non-negative; min cost is convex in the flow
amount, so this is the global optimum over all integer flows.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .costs import AssociationCosts, observation_cost, pair_cues, transition_cost_from_score
from .model import Observation, Trajectory, ValidationError

SOURCE, SINK = 0, 1


def u_node(i: int) -> int:
    return 2 + 2 * i


def v_node(i: int) -> int:
    return 3 + 2 * i


@dataclass(frozen=True)
class AssociationConfig:
    max_gap: int = 30
    costs: AssociationCosts = field(default_factory=AssociationCosts)

    def __post_init__(self):
        if self.max_gap < 1:
            raise ValidationError(f"max_gap must be >= 1, got {self.max_gap}")


@dataclass(frozen=True)
class FlowGraph:
    """Cost arrays of the association network; node layout per :func:`u_node`."""

    frames: np.ndarray
    obs_cost: np.ndarray
    entry_cost: np.ndarray
    exit_cost: np.ndarray
    tran_src: np.ndarray
    tran_dst: np.ndarray
    tran_cost: np.ndarray

    def __post_init__(self):
        n = len(self.frames)
        for name in ("obs_cost", "entry_cost", "exit_cost"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"{name} length differs from observation count")
        if not (len(self.tran_src) == len(self.tran_dst) == len(self.tran_cost)):
            raise ValidationError("transition arrays differ in length")
        if len(self.tran_src) and np.any(self.frames[self.tran_dst] <= self.frames[self.tran_src]):
            raise ValidationError("transition edge violates temporal order")

    @property
    def n_obs(self) -> int:
        return len(self.frames)

    @property
    def n_nodes(self) -> int:
        return 2 + 2 * self.n_obs

    @classmethod
    def from_costs(cls, frames, obs_cost, entry_cost, exit_cost, transitions) -> "FlowGraph":
        """Build from explicit costs; ``transitions`` maps ``(i, j)`` to a cost."""
        keys = sorted(transitions)
        return cls(
            frames=np.asarray(frames, dtype=np.int64),
            obs_cost=np.asarray(obs_cost, dtype=float),
            entry_cost=np.asarray(entry_cost, dtype=float),
            exit_cost=np.asarray(exit_cost, dtype=float),
            tran_src=np.array([k[0] for k in keys], dtype=np.int64),
            tran_dst=np.array([k[1] for k in keys], dtype=np.int64),
            tran_cost=np.array([transitions[k] for k in keys], dtype=float),
        )

    def transition_map(self) -> dict[tuple[int, int], float]:
        return {
            (int(a), int(b)): float(c)
            for a, b, c in zip(self.tran_src, self.tran_dst, self.tran_cost)
        }


@dataclass(frozen=True)
class FlowSolution:
    f_entr: tuple[bool, ...]
    f_obsv: tuple[bool, ...]
    f_exit: tuple[bool, ...]
    f_tran: tuple[bool, ...]
    total_cost: float

    @property
    def flow_amount(self) -> int:
        return sum(self.f_entr)


def candidate_transitions(frames, max_gap: int) -> tuple[np.ndarray, np.ndarray]:
    """All index pairs ``(i, j)`` with ``0 < frames[j] - frames[i] <= max_gap``."""
    frames = np.asarray(frames, dtype=np.int64)
    order = np.argsort(frames, kind="stable")
    fs = frames[order]
    src, dst = [], []
    for pos, i in enumerate(order):
        lo = np.searchsorted(fs, fs[pos] + 1, side="left")
        hi = np.searchsorted(fs, fs[pos] + max_gap, side="right")
        js = order[lo:hi]
        src.append(np.full(js.size, i, dtype=np.int64))
        dst.append(js)
    if not src:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    key = np.lexsort((dst, src))
    return src[key], dst[key]


def build_graph(observations: Sequence[Observation], cfg: AssociationConfig) -> FlowGraph:
    costs = cfg.costs
    n = len(observations)
    frames = np.array([o.frame for o in observations], dtype=np.int64)
    obs_cost = np.array([observation_cost(o.det_score, costs.logistic) for o in observations], dtype=float)
    src, dst = candidate_transitions(frames, cfg.max_gap)
    if src.size:
        q = costs.ensemble.predict(pair_cues(observations, src, dst))
        tran = transition_cost_from_score(q)
    else:
        tran = np.zeros(0)
    return FlowGraph(
        frames=frames,
        obs_cost=obs_cost,
        entry_cost=np.full(n, costs.c_entr, dtype=float),
        exit_cost=np.full(n, costs.c_exit, dtype=float),
        tran_src=src,
        tran_dst=dst,
        tran_cost=np.asarray(tran, dtype=float),
    )


class _Residual:
    """Adjacency-list residual network; edge ``e ^ 1`` is the reverse of ``e``."""

    def __init__(self, n_nodes: int):
        self.adj: list[list[int]] = [[] for _ in range(n_nodes)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []

    def add(self, a: int, b: int, cost: float) -> int:
        e = len(self.to)
        self.to += [b, a]
        self.cap += [1, 0]
        self.cost += [cost, -cost]
        self.adj[a].append(e)
        self.adj[b].append(e + 1)
        return e


def _initial_potentials(g: FlowGraph, res: _Residual) -> list[float]:
    # Bellman-Ford with edges relaxed in topological order (source, then
    # u_i/v_i by frame, then sink); on the acyclic start network one sweep
    # reaches the fixed point.
    inf = math.inf
    dist = [inf] * g.n_nodes
    dist[SOURCE] = 0.0
    order = [SOURCE]
    for i in np.argsort(g.frames, kind="stable"):
        order += [u_node(int(i)), v_node(int(i))]
    order.append(SINK)
    for a in order:
        da = dist[a]
        if da == inf:
            continue
        for e in res.adj[a]:
            if res.cap[e] > 0:
                b = res.to[e]
                nd = da + res.cost[e]
                if nd < dist[b]:
                    dist[b] = nd
    return dist


def _dijkstra(res: _Residual, pot: list[float], n_nodes: int):
    inf = math.inf
    dist = [inf] * n_nodes
    parent = [-1] * n_nodes
    dist[SOURCE] = 0.0
    heap = [(0.0, SOURCE)]
    done = [False] * n_nodes
    to, cap, cost, adj = res.to, res.cap, res.cost, res.adj
    while heap:
        d, a = heapq.heappop(heap)
        if done[a]:
            continue
        done[a] = True
        pa = pot[a]
        for e in adj[a]:
            if cap[e] <= 0:
                continue
            b = to[e]
            if done[b]:
                continue
            rc = cost[e] + pa - pot[b]
            if rc < 0.0:
                rc = 0.0  # rounding only; reduced costs are non-negative in exact arithmetic
            nd = d + rc
            if nd < dist[b]:
                dist[b] = nd
                parent[b] = e
                heapq.heappush(heap, (nd, b))
    return dist, parent


def solve_min_cost_flow(g: FlowGraph) -> FlowSolution:
    n = g.n_obs
    res = _Residual(g.n_nodes)
    e_entr = [res.add(SOURCE, u_node(i), float(g.entry_cost[i])) for i in range(n)]
    e_obsv = [res.add(u_node(i), v_node(i), float(g.obs_cost[i])) for i in range(n)]
    e_exit = [res.add(v_node(i), SINK, float(g.exit_cost[i])) for i in range(n)]
    e_tran = [
        res.add(v_node(int(a)), u_node(int(b)), float(c))
        for a, b, c in zip(g.tran_src, g.tran_dst, g.tran_cost)
    ]
    pot = _initial_potentials(g, res)
    if n and pot[SINK] < 0:
        pot = [p if p != math.inf else 0.0 for p in pot]
        while True:
            dist, parent = _dijkstra(res, pot, g.n_nodes)
            if dist[SINK] == math.inf:
                break
            path_cost = dist[SINK] + pot[SINK] - pot[SOURCE]
            if path_cost >= 0.0:
                break
            b = SINK
            while b != SOURCE:
                e = parent[b]
                res.cap[e] -= 1
                res.cap[e ^ 1] += 1
                b = res.to[e ^ 1]
            for k in range(g.n_nodes):
                if dist[k] != math.inf:
                    pot[k] += dist[k]

    def used(edges):
        return tuple(res.cap[e] == 0 for e in edges)

    f_entr, f_obsv, f_exit, f_tran = used(e_entr), used(e_obsv), used(e_exit), used(e_tran)
    total = (
        float(np.dot(g.entry_cost, f_entr))
        + float(np.dot(g.obs_cost, f_obsv))
        + float(np.dot(g.exit_cost, f_exit))
        + (float(np.dot(g.tran_cost, f_tran)) if f_tran else 0.0)
    )
    if n == 0:
        total = 0.0
    return FlowSolution(f_entr, f_obsv, f_exit, f_tran, total)


def extract_trajectories(sol: FlowSolution, g: FlowGraph) -> list[Trajectory]:
    n = g.n_obs
    out_edge: dict[int, int] = {}
    inflow = [0] * n
    outflow = [0] * n
    for k, on in enumerate(sol.f_tran):
        if on:
            a, b = int(g.tran_src[k]), int(g.tran_dst[k])
            out_edge[a] = b
            outflow[a] += 1
            inflow[b] += 1
    for i in range(n):
        if not (int(sol.f_entr[i]) + inflow[i] == int(sol.f_obsv[i]) == int(sol.f_exit[i]) + outflow[i]):
            raise ValidationError(f"flow conservation violated at observation {i}")
    chains = []
    for i in range(n):
        if sol.f_entr[i]:
            chain = [i]
            while chain[-1] in out_edge:
                chain.append(out_edge[chain[-1]])
            chains.append(chain)
    chains.sort(key=lambda c: (int(g.frames[c[0]]), c[0]))
    return [
        Trajectory(k + 1, tuple(c), tuple(int(g.frames[m]) for m in c))
        for k, c in enumerate(chains)
    ]


def associate(observations: Sequence[Observation], cfg: AssociationConfig) -> tuple[list[Trajectory], float]:
    g = build_graph(observations, cfg)
    sol = solve_min_cost_flow(g)
    return extract_trajectories(sol, g), sol.total_cost


# --- exhaustive oracle -------------------------------------------------------

BRUTE_FORCE_LIMIT = 10


def brute_force_graph(g: FlowGraph) -> tuple[list[tuple[int, ...]], float]:
    """Cheapest set of disjoint chains by exhaustive enumeration.

    Observations are visited in frame order; each one is left unused, starts a
    new chain, or extends an open chain whose tail has a transition edge to
    it.  This generates every chain partition exactly once.
    """
    n = g.n_obs
    if n > BRUTE_FORCE_LIMIT:
        raise ValidationError(f"brute force limited to {BRUTE_FORCE_LIMIT} observations, got {n}")
    tran = g.transition_map()
    order = sorted(range(n), key=lambda i: (int(g.frames[i]), i))
    best_cost = 0.0
    best_chains: list[tuple[int, ...]] = []
    chains: list[list[int]] = []

    def chain_cost(c):
        s = float(g.entry_cost[c[0]]) + float(g.exit_cost[c[-1]])
        s += sum(float(g.obs_cost[m]) for m in c)
        s += sum(tran[(a, b)] for a, b in zip(c, c[1:]))
        return s

    def rec(k: int):
        nonlocal best_cost, best_chains
        if k == n:
            cost = sum(chain_cost(c) for c in chains)
            if cost < best_cost - 1e-12:
                best_cost = cost
                best_chains = [tuple(c) for c in chains]
            return
        i = order[k]
        rec(k + 1)
        chains.append([i])
        rec(k + 1)
        chains.pop()
        for c in chains:
            tail = c[-1]
            if (tail, i) in tran and g.frames[tail] < g.frames[i]:
                c.append(i)
                rec(k + 1)
                c.pop()

    rec(0)
    return best_chains, best_cost


def brute_force_associate(observations: Sequence[Observation], cfg: AssociationConfig) -> tuple[list[Trajectory], float]:
    if len(observations) > BRUTE_FORCE_LIMIT:
        raise ValidationError(f"brute force limited to {BRUTE_FORCE_LIMIT} observations")
    g = build_graph(observations, cfg)
    chains, cost = brute_force_graph(g)
    chains.sort(key=lambda c: (observations[c[0]].frame, c[0]))
    return [Trajectory.from_members(k + 1, c, observations) for k, c in enumerate(chains)], cost
