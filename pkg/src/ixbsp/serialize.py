"""Versioned JSON snapshots of lookahead trees.

A snapshot captures everything needed to analyse or re-score a planning
session offline: tree structure, per-node posterior moments, sampled
measurements, importance densities, tags and rewards.  Loaded beliefs carry
solved moments but empty factor lists, so they support distances, objectives
and action selection; they are not meant to seed further factor-graph solves.

Covariances are stored packed (lower triangle, row major) to halve snapshot
size; all arrays round-trip bit exactly through Python floats.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from .beliefs import (
    GaussianBelief,
    MeasurementEntry,
    MeasurementSet,
    PropagatedBelief,
    VariableIndex,
)
from .errors import InvalidInput
from .models import ActionId, VariableId
from .planner import BeliefTree, BeliefTreeNode
from .sampling import MeasurementSample

TREE_FORMAT = "ixbsp-tree-v1"


def pack_sym(mat: np.ndarray) -> list[float]:
    """Lower triangle of a symmetric matrix, row major."""
    mat = np.asarray(mat, dtype=float)
    idx = np.tril_indices(mat.shape[0])
    return [float(v) for v in mat[idx]]


def unpack_sym(values: list[float], n: int) -> np.ndarray:
    """Inverse of pack_sym."""
    if len(values) != n * (n + 1) // 2:
        raise InvalidInput(
            f"packed length {len(values)} does not match dimension {n}")
    out = np.zeros((n, n))
    out[np.tril_indices(n)] = values
    return out + np.tril(out, -1).T


def _index_to_list(index: VariableIndex) -> list[list[Any]]:
    return [[v.kind, v.index] for v in index.vars]


def _index_from_list(data: list[list[Any]]) -> VariableIndex:
    return VariableIndex(tuple(VariableId(kind, int(i)) for kind, i in data))


def _zset_to_list(z_set: MeasurementSet) -> list[list[Any]]:
    return [[e.t, e.lm, [float(v) for v in e.value]] for e in z_set.entries]


def _zset_from_list(data: list[list[Any]]) -> MeasurementSet:
    return MeasurementSet(tuple(
        MeasurementEntry(int(t), int(lm), np.asarray(vals, dtype=float))
        for t, lm, vals in data))


def belief_to_json_dict(belief: GaussianBelief) -> dict[str, Any]:
    return {
        "vars": _index_to_list(belief.index),
        "mean": [float(v) for v in belief.mean],
        "cov_packed": pack_sym(belief.cov),
        "root_time": belief.root_time,
        "time": belief.time,
    }


def belief_from_json_dict(data: dict[str, Any]) -> GaussianBelief:
    index = _index_from_list(data["vars"])
    return GaussianBelief(
        index=index,
        mean=np.asarray(data["mean"], dtype=float),
        cov=unpack_sym(data["cov_packed"], index.dim),
        root_time=int(data["root_time"]),
        time=int(data["time"]),
    )


def _prop_to_json_dict(prop: PropagatedBelief) -> dict[str, Any]:
    return {
        "vars": _index_to_list(prop.index),
        "mean": [float(v) for v in prop.mean],
        "cov_packed": pack_sym(prop.cov),
        "root_time": prop.root_time,
        "time": prop.time,
        "action": prop.action.index,
    }


def _prop_from_json_dict(data: dict[str, Any]) -> PropagatedBelief:
    index = _index_from_list(data["vars"])
    return PropagatedBelief(
        index=index,
        mean=np.asarray(data["mean"], dtype=float),
        cov=unpack_sym(data["cov_packed"], index.dim),
        root_time=int(data["root_time"]),
        time=int(data["time"]),
        action=ActionId(int(data["action"])),
    )


def _sample_to_json_dict(sample: MeasurementSample) -> dict[str, Any]:
    return {
        "chi": [float(v) for v in sample.chi],
        "da": [list(pair) for pair in sample.da],
        "z": _zset_to_list(sample.z_set),
        "log_density": sample.log_density,
        "entry_log_densities": [
            [t, lm, lp] for (t, lm), lp in sorted(sample.entry_log_densities.items())
        ],
    }


def _sample_from_json_dict(data: dict[str, Any]) -> MeasurementSample:
    return MeasurementSample(
        chi=np.asarray(data["chi"], dtype=float),
        da=tuple((int(t), int(lm)) for t, lm in data["da"]),
        z_set=_zset_from_list(data["z"]),
        log_density=float(data["log_density"]),
        entry_log_densities={
            (int(t), int(lm)): float(lp)
            for t, lm, lp in data["entry_log_densities"]
        },
    )


def _node_to_json_dict(node: BeliefTreeNode) -> dict[str, Any]:
    return {
        "node_id": node.node_id,
        "parent": node.parent,
        "depth": node.depth,
        "path": list(node.path),
        "action": None if node.action is None else node.action.index,
        "sample": None if node.sample is None else _sample_to_json_dict(node.sample),
        "belief": belief_to_json_dict(node.belief),
        "prop": None if node.prop is None else _prop_to_json_dict(node.prop),
        "reward": node.reward,
        "log_p_step": node.log_p_step,
        "log_q_step": node.log_q_step,
        "tag": node.tag,
        "origin": node.origin,
        "children": [list(group) for group in node.children],
    }


def _node_from_json_dict(data: dict[str, Any]) -> BeliefTreeNode:
    action = data["action"]
    sample = data["sample"]
    return BeliefTreeNode(
        node_id=int(data["node_id"]),
        parent=None if data["parent"] is None else int(data["parent"]),
        depth=int(data["depth"]),
        path=tuple(int(a) for a in data["path"]),
        action=None if action is None else ActionId(int(action)),
        sample=None if sample is None else _sample_from_json_dict(sample),
        belief=belief_from_json_dict(data["belief"]),
        prop=None if data["prop"] is None else _prop_from_json_dict(data["prop"]),
        reward=float(data["reward"]),
        log_p_step=float(data["log_p_step"]),
        log_q_step=float(data["log_q_step"]),
        tag=str(data["tag"]),
        origin=None if data["origin"] is None else int(data["origin"]),
        children=[[int(i) for i in group] for group in data["children"]],
    )


def tree_to_json_dict(tree: BeliefTree) -> dict[str, Any]:
    return {
        "format": TREE_FORMAT,
        "planning_time": tree.planning_time,
        "horizon": tree.horizon,
        "n_u": tree.n_u,
        "n_x": tree.n_x,
        "n_z": tree.n_z,
        "base_seed": tree.base_seed,
        "root_id": tree.root_id,
        "nodes": [_node_to_json_dict(n) for n in tree.nodes],
    }


def tree_from_json_dict(data: dict[str, Any]) -> BeliefTree:
    if data.get("format") != TREE_FORMAT:
        raise InvalidInput(f"unknown snapshot format {data.get('format')!r}")
    tree = BeliefTree(
        planning_time=int(data["planning_time"]),
        horizon=int(data["horizon"]),
        n_u=int(data["n_u"]),
        n_x=int(data["n_x"]),
        n_z=int(data["n_z"]),
        base_seed=int(data["base_seed"]),
        root_id=int(data["root_id"]),
    )
    tree.nodes = [_node_from_json_dict(n) for n in data["nodes"]]
    for node in tree.nodes:
        if node.parent is not None:
            parent = tree.nodes[node.parent]
            node.cum_log_p = parent.cum_log_p + node.log_p_step
            node.cum_log_q = parent.cum_log_q + node.log_q_step
    return tree
