import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowtrack.costs import AssociationCosts, LogisticParams
from flowtrack.flow import (
    AssociationConfig,
    FlowGraph,
    FlowSolution,
    brute_force_associate,
    brute_force_graph,
    build_graph,
    extract_trajectories,
    solve_min_cost_flow,
)
from flowtrack.model import ValidationError, check_non_overlap
from flowtrack.trees import TreeEnsemble, stump

from conftest import make_obs


def _graph(frames, obs_cost, entry, exit_, trans):
    n = len(frames)
    return FlowGraph.from_costs(frames, obs_cost, [entry] * n, [exit_] * n, trans)


def random_graph(rng, n_obs, n_frames, max_gap=None):
    frames = np.sort(rng.integers(0, n_frames, n_obs))
    obs_cost = rng.uniform(-6, 1, n_obs)
    trans = {}
    for i in range(n_obs):
        for j in range(n_obs):
            gap = frames[j] - frames[i]
            if gap > 0 and (max_gap is None or gap <= max_gap):
                trans[(i, j)] = rng.uniform(0, 4)
    entry = rng.uniform(0, 4, n_obs)
    exit_ = rng.uniform(0, 4, n_obs)
    perm = rng.permutation(n_obs)  # decouple index order from frame order
    inv = np.argsort(perm)
    return FlowGraph.from_costs(
        frames[inv], obs_cost[inv], entry[inv], exit_[inv],
        {(int(perm[i]), int(perm[j])): c for (i, j), c in trans.items()},
    )


def _costs(c_entr, c_exit, bias=-2.0, ensemble=None):
    return AssociationCosts(LogisticParams(0.0, 0.0, bias), ensemble or TreeEnsemble(), c_entr, c_exit)


class TestBuildGraph:
    def test_empty(self):
        g = build_graph([], AssociationConfig())
        assert g.n_obs == 0 and g.n_nodes == 2 and len(g.tran_src) == 0

    def test_two_frames_one_edge(self):
        g = build_graph([make_obs(0), make_obs(1)], AssociationConfig())
        assert list(zip(g.tran_src, g.tran_dst)) == [(0, 1)]

    def test_gap_respected(self):
        g = build_graph([make_obs(0), make_obs(1), make_obs(3)], AssociationConfig(max_gap=1))
        assert list(zip(g.tran_src, g.tran_dst)) == [(0, 1)]

    def test_costs_filled_from_models(self):
        e = TreeEnsemble((stump(0, 0.5, -1.0, 3.0),))
        cfg = AssociationConfig(5, _costs(4.0, 6.0, bias=-1.5, ensemble=e))
        g = build_graph([make_obs(0), make_obs(1)], cfg)
        assert g.obs_cost.tolist() == [-1.5, -1.5]
        assert g.entry_cost.tolist() == [4.0, 4.0] and g.exit_cost.tolist() == [6.0, 6.0]
        assert g.tran_cost[0] == pytest.approx(np.log1p(np.exp(-3.0)))

    def test_rejects_backward_edge(self):
        with pytest.raises(ValidationError):
            _graph([1, 0], [0, 0], 1, 1, {(0, 1): 0.0})

    def test_max_gap_validation(self):
        with pytest.raises(ValidationError):
            AssociationConfig(max_gap=0)


class TestSolver:
    def test_expensive_single_observation_unused(self):
        sol = solve_min_cost_flow(_graph([0], [-2.0], 10, 10, {}))
        assert sol.flow_amount == 0 and sol.total_cost == 0.0
        assert extract_trajectories(sol, _graph([0], [-2.0], 10, 10, {})) == []

    def test_cheap_single_observation_used(self):
        g = _graph([0], [-2.0], 0.1, 0.1, {})
        sol = solve_min_cost_flow(g)
        assert sol.total_cost == pytest.approx(-1.8)
        [t] = extract_trajectories(sol, g)
        assert t.members == (0,) and t.id == 1

    def test_bipartite_diagonal(self):
        # obs 0,1 in frame 0; obs 2,3 in frame 1; diagonal 0->2, 1->3 cheap
        trans = {(0, 2): 0.1, (0, 3): 5.0, (1, 2): 5.0, (1, 3): 0.1}
        g = _graph([0, 0, 1, 1], [-5.0] * 4, 1.0, 1.0, trans)
        sol = solve_min_cost_flow(g)
        trajs = extract_trajectories(sol, g)
        assert sorted(t.members for t in trajs) == [(0, 2), (1, 3)]
        # enumerate every chain partition by hand: singletons or any matching
        best = 0.0
        for used in itertools.product([0, 1], repeat=4):
            singles = sum(2.0 - 5.0 for k in range(4) if used[k])
            best = min(best, singles)
        for pairing in ([(0, 2), (1, 3)], [(0, 3), (1, 2)], [(0, 2)], [(1, 3)], [(0, 3)], [(1, 2)]):
            linked = {m for p in pairing for m in p}
            cost = sum(2.0 - 10.0 + trans[p] for p in pairing)
            cost += sum(2.0 - 5.0 for k in range(4) if k not in linked)
            best = min(best, cost)
        assert sol.total_cost == pytest.approx(best, abs=1e-12)

    def test_chain_walk(self):
        frames = [0, 0, 1, 1, 1, 2, 2, 3]
        trans = {(2, 5): 0.0, (5, 7): 0.0}
        obs = [1.0] * 8
        obs[2] = obs[5] = obs[7] = -10.0
        g = _graph(frames, obs, 1.0, 1.0, trans)
        trajs = extract_trajectories(solve_min_cost_flow(g), g)
        assert [t.members for t in trajs] == [(2, 5, 7)]
        assert trajs[0].frames == (1, 2, 3)

    def test_conservation_violation_detected(self):
        g = _graph([0, 1], [-5, -5], 1, 1, {(0, 1): 0.0})
        bad = FlowSolution((True, False), (True, True), (False, True), (False,), 0.0)
        with pytest.raises(ValidationError, match="conservation"):
            extract_trajectories(bad, g)

    def test_ids_by_first_frame_then_index(self):
        g = _graph([1, 0, 0], [-5.0] * 3, 0.5, 0.5, {})
        trajs = extract_trajectories(solve_min_cost_flow(g), g)
        assert [(t.id, t.members) for t in trajs] == [(1, (1,)), (2, (2,)), (3, (0,))]

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 4))
    def test_matches_brute_force(self, seed, n, frames):
        g = random_graph(np.random.default_rng(seed), n, frames)
        sol = solve_min_cost_flow(g)
        _, best = brute_force_graph(g)
        assert sol.total_cost == pytest.approx(best, abs=1e-9)
        trajs = extract_trajectories(sol, g)
        check_non_overlap(trajs)
        assert sum(len(t) for t in trajs) == sum(sol.f_obsv)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 5.0))
    def test_raising_entry_exit_never_adds_trajectories(self, seed, delta):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, 8, 4)
        h = FlowGraph(g.frames, g.obs_cost, g.entry_cost + delta, g.exit_cost + delta,
                      g.tran_src, g.tran_dst, g.tran_cost)
        assert solve_min_cost_flow(h).flow_amount <= solve_min_cost_flow(g).flow_amount

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_permutation_invariant_cost(self, seed):
        rng = np.random.default_rng(seed)
        obs = [
            make_obs(int(rng.integers(0, 4)), (rng.uniform(0, 10), rng.uniform(0, 10), 5, 5),
                     score=float(rng.random()), app=rng.normal(size=4), paf=rng.normal(size=4))
            for _ in range(9)
        ]
        e = TreeEnsemble((stump(0, 0.3, -1.0, 2.0), stump(1, 1.0, 1.0, -1.0)))
        cfg = AssociationConfig(2, AssociationCosts(LogisticParams(-1.0, -4.0, -2.0), e, 1.0, 1.0))
        from flowtrack.flow import associate

        _, a = associate(obs, cfg)
        perm = rng.permutation(len(obs))
        _, b = associate([obs[k] for k in perm], cfg)
        assert a == pytest.approx(b, abs=1e-9)


class TestBruteForce:
    def test_empty(self):
        assert brute_force_associate([], AssociationConfig()) == ([], 0.0)

    def test_single_observation_cases(self):
        obs = [make_obs(0, score=0.5)]
        for c, expected in ((10.0, 0.0), (0.1, -1.8)):
            trajs, cost = brute_force_associate(obs, AssociationConfig(1, _costs(c, c)))
            assert cost == pytest.approx(expected)
            assert len(trajs) == (1 if expected < 0 else 0)

    def test_too_large(self):
        with pytest.raises(ValidationError):
            brute_force_associate([make_obs(f) for f in range(11)], AssociationConfig())
