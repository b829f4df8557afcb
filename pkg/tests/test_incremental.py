"""Incremental planning: reweighting, branch selection, reuse zones."""

from __future__ import annotations

import math

import numpy as np
import pytest

from ixbsp.beliefs import (
    MeasurementEntry,
    MeasurementSet,
    VariableIndex,
    make_prior_belief,
    planning_root,
    propagate,
    update_with_measurements,
)
from ixbsp.errors import (
    EmptyCandidates,
    IncompatibleHorizon,
    IncompatibleTrees,
    IncompleteRecord,
    InvalidInput,
)
from ixbsp.incremental import (
    MisStep,
    PlanningArchive,
    _CandidateScan,
    balance_weight,
    closest_belief,
    is_rep_sample,
    mis_objective,
    mis_record,
    plan_iml,
    plan_ixbsp,
    select_closest_branch,
)
from ixbsp.models import ActionId, landmark_var, pose_var
from ixbsp.planner import (
    TAG_NOMINAL,
    TAG_REUSED,
    TAG_WILDFIRE,
    build_tree_xbsp,
    objective,
    plan_mlbsp,
    plan_xbsp,
)

from _util import tiny_cfg


def _setup(cfg):
    world_lms = {0: (np.array([3.0, 1.5]), np.eye(2) * 1.0),
                 1: (np.array([1.0, -2.5]), np.eye(2) * 1.0)}
    prior = make_prior_belief(np.zeros(3), cfg.prior_cov(), landmarks=world_lms)
    return prior, cfg.motion_model(), cfg.meas_model(), np.array([5.0, 0.0])


def _execute(prior, action, motion, meas, jitter=0.0):
    """Posterior after executing one action and observing visible landmarks."""
    prop = propagate(prior, ActionId(action), motion)
    pose = prop.mean[prop.index.slice_of(prop.new_pose())]
    entries = []
    for lm in prop.index.landmarks():
        lpos = prop.mean[prop.index.slice_of(lm)]
        if meas.visible(pose, lpos):
            z = meas.predict(pose, lpos) + jitter
            entries.append(MeasurementEntry(prop.time, lm.index, z))
    return update_with_measurements(prop, MeasurementSet(tuple(entries)), meas)


class TestBalanceWeight:
    def test_no_reused_paths_is_exactly_one(self):
        assert balance_weight(-3.7, -9.1, 0, 4) == 1.0

    def test_equal_densities_is_exactly_one(self):
        assert balance_weight(-2.5, -2.5, 3, 1) == 1.0

    def test_all_reused_is_exact_ratio(self):
        lp, lq = -1.2, -2.0
        assert balance_weight(lp, lq, 5, 0) == float(np.exp(lp - lq))

    def test_mixed_matches_hand_formula(self):
        lp, lq, n_r, n_n = -1.0, -1.8, 2, 3
        n = n_r + n_n
        expect = math.exp(lp) / (n_r / n * math.exp(lq) + n_n / n * math.exp(lp))
        assert balance_weight(lp, lq, n_r, n_n) == pytest.approx(expect, rel=1e-12)

    def test_invalid_counts_rejected(self):
        with pytest.raises(InvalidInput):
            balance_weight(0.0, 0.0, 0, 0)
        with pytest.raises(InvalidInput):
            balance_weight(0.0, 0.0, -1, 2)


class TestMisObjective:
    def test_reduces_to_unweighted_on_fresh_tree(self):
        cfg = tiny_cfg(n_x=2)
        prior, motion, meas, goal = _setup(cfg)
        root = planning_root(prior)
        tree = build_tree_xbsp(root, cfg, motion, meas, goal, base_seed=3)
        for seq in tree.candidate_sequences():
            assert mis_objective(tree, seq) == objective(tree, seq)

    def test_step_weights_follow_tag_counts(self):
        step = MisStep(rewards=(1.0, 2.0, 4.0),
                       cum_log_p=(-1.0, -1.5, -2.0),
                       cum_log_q=(-1.4, -1.5, -2.6),
                       tags=(TAG_REUSED, TAG_NOMINAL, TAG_REUSED))
        w = step.weights()
        assert w[1] == 1.0  # densities agree
        assert w[0] == pytest.approx(balance_weight(-1.0, -1.4, 2, 1))
        assert w[2] == pytest.approx(balance_weight(-2.0, -2.6, 2, 1))

    def test_record_shape_matches_tree(self):
        cfg = tiny_cfg(n_x=2)
        prior, motion, meas, goal = _setup(cfg)
        tree = build_tree_xbsp(planning_root(prior), cfg, motion, meas, goal, 0)
        rec = mis_record(tree, (0, 0))
        assert len(rec) == cfg.horizon
        assert len(rec[0].rewards) == 2
        assert len(rec[1].rewards) == 4

    def test_malformed_step_rejected(self):
        with pytest.raises(IncompleteRecord):
            MisStep(rewards=(1.0,), cum_log_p=(0.0, 0.0), cum_log_q=(0.0,),
                    tags=(TAG_NOMINAL,))
        with pytest.raises(IncompleteRecord):
            MisStep(rewards=(), cum_log_p=(), cum_log_q=(), tags=())


class TestArchiveValidation:
    def test_executed_prefix_required(self):
        cfg = tiny_cfg()
        prior, motion, meas, goal = _setup(cfg)
        res = plan_xbsp(prior, cfg, motion, meas, goal, base_seed=0)
        with pytest.raises(InvalidInput):
            PlanningArchive(res.tree, ())
        with pytest.raises(IncompatibleHorizon):
            PlanningArchive(res.tree, (0, 1))  # consumes the whole horizon

    def test_mismatched_archive_rejected(self):
        cfg = tiny_cfg()
        prior, motion, meas, goal = _setup(cfg)
        res = plan_xbsp(prior, cfg, motion, meas, goal, base_seed=0)
        archive = PlanningArchive(res.tree, (res.best_action.index,))
        posterior = _execute(prior, res.best_action.index, motion, meas)

        other = tiny_cfg(horizon=3)
        with pytest.raises(IncompatibleTrees):
            plan_ixbsp(posterior, archive, other, motion, meas, goal, 1)

        stale = _execute(posterior, 0, motion, meas)  # time 2, archive expects 1
        with pytest.raises(IncompatibleHorizon):
            plan_ixbsp(stale, archive, cfg, motion, meas, goal, 1)


class TestSelectClosestBranch:
    def test_winner_matches_brute_force(self):
        cfg = tiny_cfg(n_x=3)
        prior, motion, meas, goal = _setup(cfg)
        res = plan_xbsp(prior, cfg, motion, meas, goal, base_seed=5)
        act = res.best_action.index
        archive = PlanningArchive(res.tree, (act,))
        posterior = _execute(prior, act, motion, meas, jitter=0.02)
        root = planning_root(posterior)

        dist, branch_id = select_closest_branch(posterior, root, archive, cfg)
        cands = [n for n in res.tree.nodes_at_depth(1) if n.path[0] == act]
        from ixbsp.distances import d_sqrt_j

        brute = min(cands, key=lambda n: d_sqrt_j(root, n.belief))
        assert branch_id == brute.node_id
        assert dist == pytest.approx(d_sqrt_j(root, brute.belief), abs=1e-12)

    def test_no_matching_prefix_raises(self):
        cfg = tiny_cfg()
        prior, motion, meas, goal = _setup(cfg)
        res = plan_xbsp(prior, cfg, motion, meas, goal, base_seed=5)
        bad = PlanningArchive.__new__(PlanningArchive)
        object.__setattr__(bad, "tree", res.tree)
        object.__setattr__(bad, "executed_actions", (9,))
        posterior = _execute(prior, 0, motion, meas)
        with pytest.raises(EmptyCandidates):
            select_closest_branch(posterior, planning_root(posterior), bad, cfg)

    def test_da_key_mode_returns_sqrt_j_of_winner(self):
        cfg = tiny_cfg(distance="da_key", n_x=2)
        prior, motion, meas, goal = _setup(cfg)
        res = plan_xbsp(prior, cfg, motion, meas, goal, base_seed=6)
        act = res.best_action.index
        archive = PlanningArchive(res.tree, (act,))
        posterior = _execute(prior, act, motion, meas)
        root = planning_root(posterior)
        dist, branch_id = select_closest_branch(posterior, root, archive, cfg)
        from ixbsp.distances import d_sqrt_j

        assert dist == pytest.approx(
            d_sqrt_j(root, res.tree.node(branch_id).belief), abs=1e-12)


class TestCandidateScan:
    def _candidates(self, cfg, seed):
        prior, motion, meas, goal = _setup(cfg)
        tree = build_tree_xbsp(planning_root(prior), cfg, motion, meas, goal, seed)
        cands = []
        for n in tree.nodes_at_depth(1):
            for a in range(tree.n_u):
                if n.children[a]:
                    cands.append(((n.node_id, a), tree.node(n.children[a][0]).prop))
        return cands, tree, motion

    def test_matches_reference_scan(self):
        cfg = tiny_cfg(n_x=2)
        cands, tree, motion = self._candidates(cfg, seed=7)
        # targets from an independent tree so no candidate is bit-identical
        other_cands, _, _ = self._candidates(cfg, seed=19)
        targets = [prop for _, prop in other_cands[:6]]
        scan = _CandidateScan(cands)
        for target in targets:
            d_ref, k_ref = closest_belief(target, cands)
            d_new, k_new = scan.closest(target)
            assert d_new == pytest.approx(d_ref, abs=1e-9)
            assert k_new == k_ref

    def test_identical_target_collapses_to_zero(self):
        # comparing an archived prop against itself: the reference scan
        # short-circuits to exact zero, the batched form to sqrt(rounding)
        cfg = tiny_cfg(n_x=2)
        cands, tree, _ = self._candidates(cfg, seed=7)
        target = cands[3][1]
        d_ref, k_ref = closest_belief(target, cands)
        d_new, k_new = _CandidateScan(cands).closest(target)
        assert d_ref == 0.0
        assert d_new <= 1e-6
        assert k_new == k_ref

    def test_empty_candidates_rejected(self):
        with pytest.raises(EmptyCandidates):
            _CandidateScan([])
        cfg = tiny_cfg()
        cands, tree, _ = self._candidates(cfg, seed=8)
        with pytest.raises(EmptyCandidates):
            closest_belief(tree.nodes_at_depth(1)[0].prop, [])


class TestIsRepSample:
    def _props(self):
        cfg = tiny_cfg()
        prior, motion, meas, goal = _setup(cfg)
        prop = propagate(planning_root(prior), ActionId(0), motion)
        return prop

    def test_infinite_band_accepts_everything(self):
        prop = self._props()
        chi = prop.mean + 1e6
        assert is_rep_sample(chi, prop.index, prop, math.inf, "per_coordinate")

    def test_per_coordinate_band(self):
        prop = self._props()
        sigma = np.sqrt(np.diag(prop.cov))
        at_band = prop.mean + 1.5 * sigma
        assert is_rep_sample(at_band, prop.index, prop, 1.5, "per_coordinate")
        outside = prop.mean.copy()
        outside[0] += 1.6 * sigma[0]
        assert not is_rep_sample(outside, prop.index, prop, 1.5, "per_coordinate")

    def test_mahalanobis_band(self):
        prop = self._props()
        assert is_rep_sample(prop.mean, prop.index, prop, 1.0, "mahalanobis")
        far = prop.mean + 50.0 * np.sqrt(np.diag(prop.cov))
        assert not is_rep_sample(far, prop.index, prop, 1.0, "mahalanobis")

    def test_disjoint_variables_rejected(self):
        prop = self._props()
        other = VariableIndex.of([landmark_var(99)])
        assert not is_rep_sample(np.zeros(2), other, prop, 1.5, "per_coordinate")


class TestIncrementalPlanners:
    def test_iml_without_archive_is_exactly_ml(self):
        cfg = tiny_cfg()
        prior, motion, meas, goal = _setup(cfg)
        a = plan_mlbsp(prior, cfg, motion, meas, goal, base_seed=0)
        b = plan_iml(prior, None, cfg, motion, meas, goal, base_seed=0)
        assert a.best_seq == b.best_seq
        assert a.objective == b.objective
        assert len(a.tree.nodes) == len(b.tree.nodes)
        for na, nb in zip(a.tree.nodes, b.tree.nodes):
            assert np.array_equal(na.belief.mean, nb.belief.mean)
            assert na.reward == nb.reward

    def test_ix_without_archive_is_exactly_x(self):
        cfg = tiny_cfg(n_x=2)
        prior, motion, meas, goal = _setup(cfg)
        a = plan_xbsp(prior, cfg, motion, meas, goal, base_seed=4)
        b = plan_ixbsp(prior, None, cfg, motion, meas, goal, base_seed=4)
        assert a.best_seq == b.best_seq
        assert a.objective == b.objective
        for na, nb in zip(a.tree.nodes, b.tree.nodes):
            if na.depth > 0:
                assert np.array_equal(na.sample.chi, nb.sample.chi)

    def _session_pair(self, cfg, seed=0):
        prior, motion, meas, goal = _setup(cfg)
        res0 = plan_xbsp(prior, cfg, motion, meas, goal, base_seed=seed)
        act = res0.best_action.index
        archive = PlanningArchive(res0.tree, (act,))
        posterior = _execute(prior, act, motion, meas, jitter=0.01)
        return posterior, archive, motion, meas, goal

    def test_update_mode_mixes_reused_and_nominal(self):
        cfg = tiny_cfg(n_x=2, use_wildfire=False)
        posterior, archive, motion, meas, goal = self._session_pair(cfg)
        res = plan_ixbsp(posterior, archive, cfg, motion, meas, goal, base_seed=1)
        assert res.reuse_info["mode"] == "update"
        # same shape as a fresh tree: 6 children at depth 1, 36 at depth 2
        assert [len(res.tree.nodes_at_depth(d)) for d in (1, 2)] == [6, 36]
        counts = res.counts
        assert counts[TAG_WILDFIRE] == 0
        assert counts[TAG_REUSED] + counts[TAG_NOMINAL] == 42
        assert counts[TAG_REUSED] > 0
        assert res.objective == res.objectives[res.best_seq]

    def test_wildfire_mode_adopts_branch_verbatim(self):
        cfg = tiny_cfg(n_x=2, epsilon_c=1e9, epsilon_wf=1e9)
        posterior, archive, motion, meas, goal = self._session_pair(cfg)
        res = plan_ixbsp(posterior, archive, cfg, motion, meas, goal, base_seed=1)
        assert res.reuse_info["mode"] == "adopt"
        assert res.counts == {TAG_NOMINAL: 36, TAG_REUSED: 0, TAG_WILDFIRE: 6}
        # adopted level nodes are the archived objects, untouched
        branch = archive.tree.node(res.reuse_info["branch_id"])
        arch_children = [archive.tree.node(c) for ids in branch.children for c in ids]
        new_level = res.tree.nodes_at_depth(1)
        for node, arch in zip(new_level, arch_children):
            assert node.belief is arch.belief
            assert node.origin == arch.node_id

    def test_distance_gate_forces_fresh_build(self):
        cfg = tiny_cfg(n_x=2, epsilon_c=0.0, epsilon_wf=0.0, use_wildfire=False)
        posterior, archive, motion, meas, goal = self._session_pair(cfg)
        res = plan_ixbsp(posterior, archive, cfg, motion, meas, goal, base_seed=1)
        assert res.reuse_info["mode"] == "fresh"
        assert res.counts[TAG_REUSED] == 0 and res.counts[TAG_WILDFIRE] == 0

    def test_wildfire_requires_variable_coverage(self):
        # archived branch lacks a landmark the new session has mapped, so
        # verbatim adoption is unsound and must fall back to update mode
        cfg = tiny_cfg(n_x=2, epsilon_c=1e9, epsilon_wf=1e9)
        prior, motion, meas, goal = _setup(cfg)
        res0 = plan_xbsp(prior, cfg, motion, meas, goal, base_seed=0)
        act = res0.best_action.index
        archive = PlanningArchive(res0.tree, (act,))
        posterior = _execute(prior, act, motion, meas)
        prop = propagate(posterior, ActionId(0), motion)
        pose = prop.mean[prop.index.slice_of(prop.new_pose())]
        z = meas.predict(pose, np.array([2.0, 2.0]))
        novel = update_with_measurements(
            prop, MeasurementSet((MeasurementEntry(prop.time, 7, z),)),
            meas, init_new_landmarks=True)
        # rebuild archive at the right time for the two-step posterior
        res1 = plan_xbsp(posterior, cfg, motion, meas, goal, base_seed=1)
        archive1 = PlanningArchive(res1.tree, (0,))
        res = plan_ixbsp(novel, archive1, cfg, motion, meas, goal, base_seed=2)
        assert res.reuse_info["mode"] == "update"

    def test_iml_reuses_under_archive(self):
        cfg = tiny_cfg(use_wildfire=False)
        prior, motion, meas, goal = _setup(cfg)
        res0 = plan_iml(prior, None, cfg, motion, meas, goal, base_seed=0)
        act = res0.best_action.index
        archive = PlanningArchive(res0.tree, (act,))
        posterior = _execute(prior, act, motion, meas, jitter=0.005)
        res = plan_iml(posterior, archive, cfg, motion, meas, goal, base_seed=1)
        assert res.method == "imlbsp"
        assert res.reuse_info["mode"] == "update"
        assert res.counts[TAG_REUSED] > 0
        assert [len(res.tree.nodes_at_depth(d)) for d in (1, 2)] == [3, 9]
