"""Lookahead belief trees and the sampling-based planners.

A planning session expands a tree rooted at the current posterior: each level
picks every candidate action, propagates, generates measurement futures
(state-major: n_x state realizations times n_z value draws each, or the
single most-likely future), and conditions.  The objective of a candidate
action sequence averages immediate rewards over that sequence's sample paths
level by level:

    J(u_seq) = sum_i (1/n_i) sum_{paths at step i} w * r_i,

with unit weights for freshly sampled trees.  The argmax over sequences (ties
to the lowest enumeration index) gives the action to execute.

Per-node random streams are keyed by the node's path from the root, so a tree
build is deterministic under any traversal or parallel order.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._gaussian import spd_logdet
from .beliefs import (
    GaussianBelief,
    GaussianState,
    PropagatedBelief,
    planning_root,
    propagate,
    update_with_measurements,
)
from .config import RewardConfig, ScenarioConfig
from .errors import InvalidInput, UnknownSequence
from .models import ActionId, MeasModel, MotionModel
from .sampling import (
    MeasurementSample,
    most_likely_measurement,
    node_rng,
    sample_future_measurements,
)

RewardSpec = RewardConfig

TAG_NOMINAL = "nominal"
TAG_REUSED = "reused"
TAG_WILDFIRE = "wildfire"

_LOG_2PI_E = float(np.log(2.0 * np.pi) + 1.0)


def distance_to_goal(belief: GaussianState, goal: np.ndarray) -> float:
    """Euclidean distance from the newest pose's position mean to the goal."""
    sl = belief.index.slice_of(belief.index.newest_pose())
    pos = belief.mean[sl][:2]
    return float(np.hypot(pos[0] - goal[0], pos[1] - goal[1]))


def reward_info_distance(
    belief: GaussianState,
    prev_belief: GaussianState,
    spec: RewardSpec,
    goal: np.ndarray,
) -> float:
    """Immediate reward of reaching ``belief`` from ``prev_belief``.

    info_and_distance blends the information of the focused marginal with the
    step's progress toward the goal; distance_with_cov_penalty trades progress
    against a hard uncertainty gate.
    """
    d2g_prev = distance_to_goal(prev_belief, goal)
    d2g = distance_to_goal(belief, goal)
    progress = d2g_prev - d2g
    pose_marg = belief.marginal([belief.index.newest_pose()])
    cov = pose_marg.cov if spec.focus == "pose" else pose_marg.cov[:2, :2]
    if spec.kind == "info_and_distance":
        n = cov.shape[0]
        info = 0.5 * (n * _LOG_2PI_E - spd_logdet(cov))
        return spec.alpha * info + (1.0 - spec.alpha) * progress
    # distance_with_cov_penalty
    spread = math.sqrt(float(np.trace(cov)))
    penalty = spec.penalty if spread > spec.cov_threshold else 0.0
    return progress - penalty


@dataclass(slots=True)
class BeliefTreeNode:
    """One posterior node of the lookahead tree.  Mutated only during build."""

    node_id: int
    parent: int | None
    depth: int
    path: tuple[int, ...]
    action: ActionId | None
    sample: MeasurementSample | None
    belief: GaussianBelief
    prop: PropagatedBelief | None
    reward: float = 0.0
    log_p_step: float = 0.0
    log_q_step: float = 0.0
    cum_log_p: float = 0.0
    cum_log_q: float = 0.0
    tag: str = TAG_NOMINAL
    origin: int | None = None
    children: list[list[int]] = field(default_factory=list)

    def step_weight_neutral(self) -> bool:
        return self.cum_log_p == self.cum_log_q


@dataclass
class BeliefTree:
    """Arena-allocated lookahead tree for one planning session."""

    planning_time: int
    horizon: int
    n_u: int
    n_x: int
    n_z: int
    base_seed: int
    nodes: list[BeliefTreeNode] = field(default_factory=list)
    depth_times: list[float] = field(default_factory=list)
    root_id: int = 0

    @property
    def samples_per_action(self) -> int:
        return self.n_x * self.n_z

    def node(self, node_id: int) -> BeliefTreeNode:
        return self.nodes[node_id]

    @property
    def root(self) -> BeliefTreeNode:
        return self.nodes[self.root_id]

    def add_root(self, belief: GaussianBelief) -> BeliefTreeNode:
        if self.nodes:
            raise InvalidInput("tree already has a root")
        node = BeliefTreeNode(
            node_id=0, parent=None, depth=0, path=(), action=None,
            sample=None, belief=belief, prop=None,
            children=[[] for _ in range(self.n_u)],
        )
        self.nodes.append(node)
        return node

    def add_child(
        self,
        parent: BeliefTreeNode,
        action_index: int,
        sample_index: int,
        **kwargs,
    ) -> BeliefTreeNode:
        node = BeliefTreeNode(
            node_id=len(self.nodes),
            parent=parent.node_id,
            depth=parent.depth + 1,
            path=parent.path + (action_index, sample_index),
            children=[[] for _ in range(self.n_u)],
            **kwargs,
        )
        node.cum_log_p = parent.cum_log_p + node.log_p_step
        node.cum_log_q = parent.cum_log_q + node.log_q_step
        self.nodes.append(node)
        parent.children[action_index].append(node.node_id)
        return node

    def nodes_at_depth(self, depth: int) -> list[BeliefTreeNode]:
        return [n for n in self.nodes if n.depth == depth]

    def candidate_sequences(self) -> list[tuple[int, ...]]:
        return [tuple(s) for s in itertools.product(range(self.n_u), repeat=self.horizon)]

    def paths_for_seq(self, seq: tuple[int, ...], depth: int) -> list[BeliefTreeNode]:
        """All step-``depth`` nodes consistent with the sequence prefix."""
        if depth < 1 or depth > self.horizon:
            raise InvalidInput(f"depth {depth} outside horizon")
        if len(seq) < depth:
            raise UnknownSequence(f"sequence {seq} shorter than depth {depth}")
        if any(a < 0 or a >= self.n_u for a in seq):
            raise UnknownSequence(f"sequence {seq} references unknown actions")
        frontier = [self.root]
        for d in range(depth):
            nxt: list[BeliefTreeNode] = []
            for node in frontier:
                nxt.extend(self.nodes[cid] for cid in node.children[seq[d]])
            frontier = nxt
        return frontier

    def tag_counts(self) -> dict[str, int]:
        counts = {TAG_NOMINAL: 0, TAG_REUSED: 0, TAG_WILDFIRE: 0}
        for n in self.nodes:
            if n.depth > 0:
                counts[n.tag] += 1
        return counts


@dataclass(frozen=True)
class PlanningResult:
    """Outcome of one planning session."""

    tree: BeliefTree
    method: str
    objectives: dict[tuple[int, ...], float]
    best_seq: tuple[int, ...]
    best_action: ActionId
    objective: float
    counts: dict[str, int]
    timing: dict[str, float]
    reuse_info: dict[str, float | int | str | None] = field(default_factory=dict)


def expand_depth(
    tree: BeliefTree,
    parents: list[BeliefTreeNode],
    motion: MotionModel,
    meas: MeasModel,
    reward_fn,
    *,
    most_likely: bool = False,
    forced_samples: dict[tuple[int, ...], list[MeasurementSample]] | None = None,
) -> list[BeliefTreeNode]:
    """Expand one fresh (nominal) level under every parent node.

    ``forced_samples`` maps (parent path + (action,)) to the exact samples to
    use instead of drawing, for replay-style verification.
    """
    created: list[BeliefTreeNode] = []
    per_action = 1 if most_likely else tree.samples_per_action
    for parent in parents:
        for a in range(tree.n_u):
            prop = propagate(parent.belief, ActionId(a), motion)
            key = parent.path + (a,)
            if forced_samples is not None and key in forced_samples:
                samples = forced_samples[key]
                if len(samples) != per_action:
                    raise InvalidInput(
                        f"forced sample count {len(samples)} != {per_action}")
            elif most_likely:
                samples = [most_likely_measurement(prop, meas)]
            else:
                rng = node_rng(tree.base_seed, key)
                samples = sample_future_measurements(prop, meas, tree.n_x, tree.n_z, rng)
            for s_idx, sample in enumerate(samples):
                belief = update_with_measurements(prop, sample.z_set, meas)
                node = tree.add_child(
                    parent, a, s_idx,
                    action=ActionId(a), sample=sample, belief=belief, prop=prop,
                    reward=reward_fn(belief, parent.belief),
                    log_p_step=sample.log_density,
                    log_q_step=sample.log_density,
                    tag=TAG_NOMINAL, origin=None,
                )
                created.append(node)
    return created


def make_reward_fn(spec: RewardSpec, goal: np.ndarray):
    def fn(belief: GaussianState, prev_belief: GaussianState) -> float:
        return reward_info_distance(belief, prev_belief, spec, goal)
    return fn


def _build_tree(
    root_belief: GaussianBelief,
    cfg: ScenarioConfig,
    motion: MotionModel,
    meas: MeasModel,
    goal: np.ndarray,
    base_seed: int,
    *,
    most_likely: bool,
    forced_samples: dict[tuple[int, ...], list[MeasurementSample]] | None = None,
) -> BeliefTree:
    tree = BeliefTree(
        planning_time=root_belief.time, horizon=cfg.horizon,
        n_u=cfg.n_u, n_x=1 if most_likely else cfg.n_x,
        n_z=1 if most_likely else cfg.n_z, base_seed=base_seed,
    )
    tree.add_root(root_belief)
    reward_fn = make_reward_fn(cfg.reward, goal)
    frontier = [tree.root]
    for _ in range(cfg.horizon):
        t0 = time.perf_counter()
        frontier = expand_depth(
            tree, frontier, motion, meas, reward_fn,
            most_likely=most_likely, forced_samples=forced_samples,
        )
        tree.depth_times.append(time.perf_counter() - t0)
    return tree


def build_tree_xbsp(
    root_belief: GaussianBelief,
    cfg: ScenarioConfig,
    motion: MotionModel,
    meas: MeasModel,
    goal: np.ndarray,
    base_seed: int,
    forced_samples: dict[tuple[int, ...], list[MeasurementSample]] | None = None,
) -> BeliefTree:
    """Full-expectation lookahead tree: n_x * n_z sampled futures per action."""
    return _build_tree(root_belief, cfg, motion, meas, goal, base_seed,
                       most_likely=False, forced_samples=forced_samples)


def build_tree_ml(
    root_belief: GaussianBelief,
    cfg: ScenarioConfig,
    motion: MotionModel,
    meas: MeasModel,
    goal: np.ndarray,
    base_seed: int,
) -> BeliefTree:
    """Maximum-likelihood lookahead tree: one model-mean future per action."""
    return _build_tree(root_belief, cfg, motion, meas, goal, base_seed,
                       most_likely=True)


def objective(tree: BeliefTree, seq: tuple[int, ...]) -> float:
    """Unweighted sampled objective of one candidate sequence (fresh trees)."""
    total = 0.0
    for depth in range(1, tree.horizon + 1):
        nodes = tree.paths_for_seq(seq, depth)
        if not nodes:
            raise UnknownSequence(f"sequence {seq} has no paths at depth {depth}")
        acc = 0.0
        for n in nodes:
            acc += 1.0 * n.reward
        total += acc / len(nodes)
    return total


def best_action(
    tree: BeliefTree,
    objective_fn=None,
) -> tuple[ActionId, tuple[int, ...], float, dict[tuple[int, ...], float]]:
    """Argmax over candidate sequences; ties resolve to the lowest index."""
    fn = objective_fn if objective_fn is not None else objective
    best_seq: tuple[int, ...] | None = None
    best_val = -math.inf
    values: dict[tuple[int, ...], float] = {}
    for seq in tree.candidate_sequences():
        val = fn(tree, seq)
        values[seq] = val
        if val > best_val:
            best_val = val
            best_seq = seq
    assert best_seq is not None
    return ActionId(best_seq[0]), best_seq, best_val, values


def _timing_from_tree(tree: BeliefTree, overlap_depths: int) -> dict[str, float]:
    total = float(sum(tree.depth_times))
    overlap = float(sum(tree.depth_times[:overlap_depths]))
    return {"total_s": total, "overlap_s": overlap,
            "extension_s": total - overlap}


def plan_xbsp(
    root_belief: GaussianBelief,
    cfg: ScenarioConfig,
    motion: MotionModel,
    meas: MeasModel,
    goal: np.ndarray,
    base_seed: int,
) -> PlanningResult:
    """One full-expectation planning session from the given posterior root."""
    root = planning_root(root_belief)
    tree = build_tree_xbsp(root, cfg, motion, meas, goal, base_seed)
    act, seq, val, values = best_action(tree)
    return PlanningResult(
        tree=tree, method="xbsp", objectives=values, best_seq=seq,
        best_action=act, objective=val, counts=tree.tag_counts(),
        timing=_timing_from_tree(tree, cfg.horizon - cfg.overlap),
    )


def plan_mlbsp(
    root_belief: GaussianBelief,
    cfg: ScenarioConfig,
    motion: MotionModel,
    meas: MeasModel,
    goal: np.ndarray,
    base_seed: int,
) -> PlanningResult:
    """One maximum-likelihood planning session."""
    root = planning_root(root_belief)
    tree = build_tree_ml(root, cfg, motion, meas, goal, base_seed)
    act, seq, val, values = best_action(tree)
    return PlanningResult(
        tree=tree, method="mlbsp", objectives=values, best_seq=seq,
        best_action=act, objective=val, counts=tree.tag_counts(),
        timing=_timing_from_tree(tree, cfg.horizon - cfg.overlap),
    )
