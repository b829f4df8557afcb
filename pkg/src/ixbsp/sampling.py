"""Future-measurement generation for belief-space planning.

Given a propagated belief b-minus, lookahead measurements are generated in
three moves: sample a joint state realization chi ~ b-minus, gate landmarks
through the sensor's field of view at chi (the predicted data association),
then draw measurement values from the observation model at chi.  The
most-likely variant replaces every draw with the model mean at the propagated
mean.

Densities of measurement sets under a propagated belief marginalize the state
per entry: z_e ~ N(h(mu), Sigma_v + J Sigma J^T) with J the measurement
Jacobian at the propagated mean.  Entries multiply as if independent; the
shared-pose correlation between entries of one step is deliberately dropped
so that per-entry densities can be cached and re-used under data-association
changes.  Reweighting ratios always compare densities computed the same way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._gaussian import chol_lower, gaussian_logpdf
from .beliefs import (
    MeasurementEntry,
    MeasurementSet,
    PropagatedBelief,
    wrap_state,
)
from .errors import InvalidInput, UnknownLandmark
from .models import MeasModel, landmark_var, wrap_angle


@dataclass(frozen=True, slots=True)
class MeasurementSample:
    """One sampled future: a state realization and the measurements it yielded.

    ``log_density`` and ``entry_log_densities`` are evaluated under the
    generating propagated belief at creation time, so re-use never has to
    reconstruct the generator.
    """

    chi: np.ndarray
    da: tuple[tuple[int, int], ...]
    z_set: MeasurementSet
    log_density: float
    entry_log_densities: dict[tuple[int, int], float]

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.chi, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "chi", arr)


def node_rng(base_seed: int, path: tuple[int, ...]) -> np.random.Generator:
    """Deterministic per-node random stream.

    The stream depends only on the base seed and the node's path in the tree,
    never on construction order, so serial and parallel builds agree.
    """
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def predicted_da(
    prop: PropagatedBelief, model: MeasModel, at_state: np.ndarray | None = None
) -> tuple[tuple[int, int], ...]:
    """Visible-landmark keys (t, lm) at a state realization (default: the mean).

    Only landmarks already inside the belief are considered; planning never
    invents landmarks it has not mapped.
    """
    if model.kind == "linear":
        return ((prop.time, -1),)
    x = prop.mean if at_state is None else np.asarray(at_state, dtype=float)
    if x.size != prop.index.dim:
        raise InvalidInput("state realization dimension mismatch")
    pose = x[prop.index.slice_of(prop.new_pose())]
    keys = []
    for lm in prop.index.landmarks():
        lpos = x[prop.index.slice_of(lm)]
        if model.visible(pose, lpos):
            keys.append((prop.time, lm.index))
    return tuple(keys)


def _measure_at(
    prop: PropagatedBelief,
    model: MeasModel,
    chi: np.ndarray,
    da: tuple[tuple[int, int], ...],
    rng: np.random.Generator | None,
) -> MeasurementSet:
    """Draw (or take the mean of) measurement values at a state realization."""
    pose = chi[prop.index.slice_of(prop.new_pose())]
    noise_l = chol_lower(model.noise_cov)
    entries = []
    for t, lm in da:
        if model.kind == "linear":
            z = model.predict(pose)
        else:
            lpos = chi[prop.index.slice_of(landmark_var(lm))]
            z = model.predict(pose, lpos)
        if rng is not None:
            z = z + noise_l @ rng.standard_normal(z.size)
            if model.kind == "range_bearing":
                z = np.array([z[0], wrap_angle(z[1])])
        entries.append(MeasurementEntry(t, lm, z))
    return MeasurementSet(tuple(entries))


def sample_state_futures(
    prop: PropagatedBelief,
    model: MeasModel,
    n_z: int,
    rng: np.random.Generator,
    chi: np.ndarray | None = None,
) -> list[MeasurementSample]:
    """n_z measurement sets from one state realization (drawn if not given)."""
    if chi is None:
        low = chol_lower(prop.cov)
        chi = wrap_state(prop.index, prop.mean + low @ rng.standard_normal(prop.dim))
    da = predicted_da(prop, model, chi)
    out = []
    for _ in range(n_z):
        z_set = _measure_at(prop, model, chi, da, rng)
        total, per_entry = measurement_likelihood_density(z_set, prop, model)
        out.append(MeasurementSample(chi, da, z_set, total, per_entry))
    return out


def sample_future_measurements(
    prop: PropagatedBelief,
    model: MeasModel,
    n_x: int,
    n_z: int,
    rng: np.random.Generator,
) -> list[MeasurementSample]:
    """Draw n_x state realizations and n_z measurement sets from each.

    Returns n_x * n_z samples ordered state-major; sample j*n_z + m shares
    chi_j.  Each sample carries its log density under ``prop``.
    """
    if n_x < 1 or n_z < 1:
        raise InvalidInput("n_x and n_z must be >= 1")
    samples: list[MeasurementSample] = []
    for _ in range(n_x):
        samples.extend(sample_state_futures(prop, model, n_z, rng))
    return samples


def most_likely_measurement(
    prop: PropagatedBelief, model: MeasModel
) -> MeasurementSample:
    """The single maximum-likelihood future: model means at the propagated mean."""
    chi = prop.mean.copy()
    da = predicted_da(prop, model, chi)
    z_set = _measure_at(prop, model, chi, da, rng=None)
    total, per_entry = measurement_likelihood_density(z_set, prop, model)
    return MeasurementSample(chi, da, z_set, total, per_entry)


def entry_predictive(
    prop: PropagatedBelief, model: MeasModel, lm: int
) -> tuple[np.ndarray, np.ndarray]:
    """Linearized predictive Gaussian (mean, cov) of one entry under b-minus."""
    pose_vid = prop.new_pose()
    if model.kind == "linear":
        marg = prop.marginal([pose_vid])
        h = model.h_mat
        mean = h @ marg.mean
        cov = model.noise_cov + h @ marg.cov @ h.T
        return mean, cov
    lvid = landmark_var(lm)
    if lvid not in prop.index:
        raise UnknownLandmark(f"landmark {lm} not in propagated belief")
    marg = prop.marginal([pose_vid, lvid])
    pose = marg.mean[marg.index.slice_of(pose_vid)]
    lpos = marg.mean[marg.index.slice_of(lvid)]
    mean = model.predict(pose, lpos)
    h_pose, h_lm = model.jacobians(pose, lpos)
    jac = np.zeros((2, marg.index.dim))
    jac[:, marg.index.slice_of(pose_vid)] = h_pose
    jac[:, marg.index.slice_of(lvid)] = h_lm
    cov = model.noise_cov + jac @ marg.cov @ jac.T
    return mean, cov


def entry_log_density(
    entry: MeasurementEntry, prop: PropagatedBelief, model: MeasModel
) -> float:
    """Log predictive density of one measurement entry under b-minus."""
    mean, cov = entry_predictive(prop, model, entry.lm)
    diff = entry.value - mean
    if model.kind == "range_bearing":
        diff = np.array([diff[0], wrap_angle(diff[1])])
    return gaussian_logpdf(diff, np.zeros(diff.size), cov)


def measurement_likelihood_density(
    z_set: MeasurementSet, prop: PropagatedBelief, model: MeasModel
) -> tuple[float, dict[tuple[int, int], float]]:
    """Log density of a measurement set under a propagated belief.

    Returns the total (sum over entries) and the per-entry breakdown.  An
    empty set has density one (log zero): with nothing observed the belief
    is unchanged and the event carries no weight.
    """
    per_entry: dict[tuple[int, int], float] = {}
    total = 0.0
    for entry in z_set:
        lp = entry_log_density(entry, prop, model)
        per_entry[entry.key] = lp
        total += lp
    return total, per_entry
