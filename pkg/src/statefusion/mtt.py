"""Multi-target tracking: Gaussian-mixture intensity filtering and
probabilistic data association.

The intensity filter propagates an unnormalized Gaussian mixture whose total
weight is the expected number of targets; no measurement-to-track assignment
is ever made.  ``pda_update`` is the opposite trade: one track, soft
assignment over gated detections.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from ._linalg import gaussian_pdf, symmetrize
from .statespace import GaussianEstimate, as_matrix, as_vector, check_covariance

__all__ = [
    "GaussianMixture",
    "PhdConfig",
    "DetectionSet",
    "phd_predict",
    "phd_update",
    "phd_prune_merge",
    "phd_extract",
    "pda_update",
]


@dataclass
class GaussianMixture:
    """A weighted Gaussian mixture stored as parallel arrays.

    With ``normalized`` the weights are validated to sum to one (a probability
    density); otherwise the mixture is an intensity whose total weight is an
    expected count.
    """

    weights: np.ndarray  # (count,)
    means: np.ndarray    # (count, dim)
    covs: np.ndarray     # (count, dim, dim)
    normalized: bool = False

    def __post_init__(self):
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.means = np.asarray(self.means, dtype=float)
        self.covs = np.asarray(self.covs, dtype=float)
        if self.means.ndim != 2 or self.covs.ndim != 3:
            raise ValueError("means must be (count, dim) and covs (count, dim, dim)")
        count, dim = self.means.shape
        if self.weights.shape != (count,) or self.covs.shape != (count, dim, dim):
            raise ValueError("mixture arrays have inconsistent shapes")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("mixture weights must be finite and non-negative")
        for k in range(count):
            check_covariance(self.covs[k], f"component {k} covariance")
        if self.normalized and abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("normalized mixture weights must sum to one")

    @classmethod
    def empty(cls, dim: int) -> "GaussianMixture":
        return cls(np.zeros(0), np.zeros((0, dim)), np.zeros((0, dim, dim)))

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())


@dataclass
class PhdConfig:
    """Everything the intensity filter needs to run one step.

    ``dynamics`` is (A, sigma_eps); ``measurement`` is (H, sigma_z).
    ``spawn`` lists (weight, A_sp, b_sp, sigma_sp) tuples describing targets
    spawned off existing ones.  ``clutter_density`` is the clutter intensity
    per unit measurement volume (assumed uniform).
    """

    p_survive: float
    p_detect: float
    clutter_density: float
    birth: GaussianMixture
    dynamics: Tuple[np.ndarray, np.ndarray]
    measurement: Tuple[np.ndarray, np.ndarray]
    spawn: List[Tuple[float, np.ndarray, np.ndarray, np.ndarray]] = field(default_factory=list)
    prune_threshold: float = 1e-5
    merge_threshold: float = 4.0
    max_components: int = 100

    def __post_init__(self):
        if not 0.0 <= self.p_survive <= 1.0:
            raise ValueError("p_survive must lie in [0, 1]")
        if not 0.0 <= self.p_detect <= 1.0:
            raise ValueError("p_detect must lie in [0, 1]")
        if self.clutter_density < 0.0:
            raise ValueError("clutter_density must be non-negative")
        a, q = self.dynamics
        self.dynamics = (as_matrix(a, "dynamics A"), check_covariance(q, "dynamics noise"))
        h, r = self.measurement
        self.measurement = (as_matrix(h, "H"), check_covariance(r, "sigma_z"))
        self.spawn = [
            (float(w), as_matrix(a_sp, "spawn A"), as_vector(b_sp, "spawn offset"),
             check_covariance(q_sp, "spawn noise"))
            for (w, a_sp, b_sp, q_sp) in self.spawn
        ]
        if self.prune_threshold <= 0.0:
            raise ValueError("prune_threshold must be positive")
        if self.merge_threshold <= 0.0:
            raise ValueError("merge_threshold must be positive")
        if self.max_components < 1:
            raise ValueError("max_components must be at least 1")


@dataclass
class DetectionSet:
    """Point detections for one scan: true-target returns mixed with clutter."""

    detections: np.ndarray  # (count, meas_dim)
    timestamp: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.detections, dtype=float)
        if d.size == 0:
            d = d.reshape(0, d.shape[-1] if d.ndim == 2 else 0)
        if d.ndim == 1:
            d = d.reshape(1, -1)
        if d.ndim != 2:
            raise ValueError("detections must be a (count, dim) array")
        if not np.all(np.isfinite(d)):
            raise ValueError("detections contain non-finite entries")
        self.detections = d

    @property
    def size(self) -> int:
        return self.detections.shape[0]


def phd_predict(intensity: GaussianMixture, config: PhdConfig) -> GaussianMixture:
    """Predict the target intensity one step forward.

    Output components, in order: birth components, surviving components
    (weights scaled by the survival probability), then spawned components
    (one per surviving parent and spawn mode).  Total count is
    len(birth) + len(intensity) * (1 + len(spawn)).
    """
    a, q = config.dynamics
    weights, means, covs = [], [], []

    for k in range(config.birth.size):
        weights.append(config.birth.weights[k])
        means.append(config.birth.means[k])
        covs.append(config.birth.covs[k])

    for k in range(intensity.size):
        weights.append(config.p_survive * intensity.weights[k])
        means.append(a @ intensity.means[k])
        covs.append(symmetrize(a @ intensity.covs[k] @ a.T + q))

    for k in range(intensity.size):
        for (w_sp, a_sp, b_sp, q_sp) in config.spawn:
            weights.append(intensity.weights[k] * w_sp)
            means.append(a_sp @ intensity.means[k] + b_sp)
            covs.append(symmetrize(a_sp @ intensity.covs[k] @ a_sp.T + q_sp))

    dim = intensity.dim if intensity.size else config.birth.dim
    if not weights:
        return GaussianMixture.empty(dim)
    return GaussianMixture(np.array(weights), np.array(means), np.array(covs))


def phd_update(predicted: GaussianMixture, detections: DetectionSet, config: PhdConfig) -> GaussianMixture:
    """Condition the predicted intensity on one scan of detections.

    The output keeps one missed-detection copy of every predicted component
    (weight scaled by 1 - p_detect) plus one detection-conditioned copy per
    (detection, component) pair, weighted by the detection likelihood against
    the clutter floor.  Count is len(predicted) * (1 + len(detections)).
    """
    h, r = config.measurement
    count = predicted.size
    if count == 0:
        return GaussianMixture.empty(predicted.dim)
    p_d = config.p_detect

    # Per-component innovation statistics are detection-independent.
    z_hats = np.empty((count, h.shape[0]))
    innov_covs = np.empty((count, h.shape[0], h.shape[0]))
    gains = np.empty((count, predicted.dim, h.shape[0]))
    post_covs = np.empty_like(predicted.covs)
    eye = np.eye(predicted.dim)
    for k in range(count):
        cov = predicted.covs[k]
        s = symmetrize(h @ cov @ h.T + r)
        gain = np.linalg.solve(s, h @ cov).T
        z_hats[k] = h @ predicted.means[k]
        innov_covs[k] = s
        gains[k] = gain
        post_covs[k] = symmetrize((eye - gain @ h) @ cov)

    weights, means, covs = [], [], []
    for k in range(count):
        weights.append((1.0 - p_d) * predicted.weights[k])
        means.append(predicted.means[k])
        covs.append(predicted.covs[k])

    for z in detections.detections:
        lik = np.array([gaussian_pdf(z, z_hats[k], innov_covs[k]) for k in range(count)])
        denominator = config.clutter_density + p_d * float(predicted.weights @ lik)
        for k in range(count):
            w = 0.0 if denominator == 0.0 else p_d * predicted.weights[k] * lik[k] / denominator
            weights.append(w)
            means.append(predicted.means[k] + gains[k] @ (z - z_hats[k]))
            covs.append(post_covs[k])

    return GaussianMixture(np.array(weights), np.array(means), np.array(covs))


def phd_prune_merge(intensity: GaussianMixture, config: PhdConfig) -> GaussianMixture:
    """Cut low-weight components and merge near-coincident ones.

    Components with weight below the prune threshold are dropped.  The rest
    are clustered greedily: the highest-weight survivor absorbs every
    component whose squared Mahalanobis distance to it (in the component's own
    covariance metric) is within the merge threshold; the cluster is replaced
    by its moment-matched single Gaussian.  If the result still exceeds
    ``max_components`` only the heaviest survive.  Merging preserves total
    weight exactly; pruning removes exactly the pruned components' mass.
    """
    if intensity.size == 0:
        return intensity
    keep = intensity.weights >= config.prune_threshold
    weights = intensity.weights[keep]
    means = intensity.means[keep]
    covs = intensity.covs[keep]

    out_w, out_x, out_p = [], [], []
    remaining = list(range(weights.size))
    while remaining:
        best = max(remaining, key=lambda i: (weights[i], -i))
        cluster = []
        for i in remaining:
            diff = means[i] - means[best]
            dist = float(diff @ np.linalg.solve(covs[i], diff))
            if dist <= config.merge_threshold:
                cluster.append(i)
        w_sum = float(weights[cluster].sum()) if len(cluster) > 1 else float(weights[cluster[0]])
        mean = sum(weights[i] * means[i] for i in cluster) / w_sum
        cov = sum(
            weights[i] * (covs[i] + np.outer(means[i] - mean, means[i] - mean))
            for i in cluster
        ) / w_sum
        out_w.append(w_sum)
        out_x.append(mean)
        out_p.append(symmetrize(cov))
        remaining = [i for i in remaining if i not in cluster]

    if len(out_w) > config.max_components:
        order = np.argsort(-np.asarray(out_w), kind="stable")[: config.max_components]
        order = np.sort(order)
        out_w = [out_w[i] for i in order]
        out_x = [out_x[i] for i in order]
        out_p = [out_p[i] for i in order]

    if not out_w:
        return GaussianMixture.empty(intensity.dim)
    return GaussianMixture(np.array(out_w), np.array(out_x), np.array(out_p))


def phd_extract(intensity: GaussianMixture) -> List[np.ndarray]:
    """Pull point estimates out of the intensity.

    Every component with weight above 0.5 contributes round(weight) copies of
    its mean (round half up), so a component that has absorbed two coincident
    targets is reported twice.
    """
    states: List[np.ndarray] = []
    for k in range(intensity.size):
        w = intensity.weights[k]
        if w > 0.5:
            copies = int(np.floor(w + 0.5))
            states.extend(intensity.means[k].copy() for _ in range(copies))
    return states


def pda_update(track: GaussianEstimate, gated: DetectionSet, meas, gate_threshold: float) -> GaussianEstimate:
    """Soft-assignment update of a single track over candidate detections.

    Detections outside the Mahalanobis gate (squared distance above
    ``gate_threshold`` in the innovation metric) are ignored.  The remaining
    candidates are weighted by their Gaussian likelihood; the output moment-
    matches the per-candidate posteriors, which inflates the covariance by the
    spread between candidate hypotheses.  With no gated detection the prior is
    returned unchanged — association uncertainty without any detection adds
    no information.

    This is a single-target association step: it does not model the
    missed-detection hypothesis explicitly.
    """
    h, r = meas.H, meas.sigma_z
    if gate_threshold <= 0:
        raise ValueError("gate_threshold must be positive")
    s = symmetrize(h @ track.cov @ h.T + r)
    if np.linalg.cond(s) >= 1e12:
        raise np.linalg.LinAlgError("innovation covariance is numerically singular")
    z_hat = h @ track.mean

    kept = []
    for z in gated.detections:
        diff = z - z_hat
        if float(diff @ np.linalg.solve(s, diff)) <= gate_threshold:
            kept.append(z)
    if not kept:
        return track

    gain = np.linalg.solve(s, h @ track.cov).T
    post_cov = symmetrize((np.eye(track.dim) - gain @ h) @ track.cov)
    lik = np.array([gaussian_pdf(z, z_hat, s) for z in kept])
    beta = lik / lik.sum()
    candidates = np.array([track.mean + gain @ (z - z_hat) for z in kept])
    mean = beta @ candidates
    spread = sum(
        beta[j] * np.outer(candidates[j] - mean, candidates[j] - mean)
        for j in range(len(kept))
    )
    return GaussianEstimate(mean, symmetrize(post_cov + spread))
