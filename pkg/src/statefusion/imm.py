"""Interacting multiple-model estimation over a bank of motion hypotheses.

All bank members must share one state space; heterogeneous kinematic
hypotheses (constant position / velocity / acceleration) are expressed in the
shared 3-state form from the model library with per-member noise channels.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ._linalg import symmetrize
from .kalman import kf_predict, kf_update
from .nonlinear import ekf_predict, ekf_update
from .statespace import (
    GaussianEstimate,
    LinearMeasurementModel,
    LinearStateSpace,
    as_vector,
)

__all__ = ["ImmBank", "imm_mix", "imm_weight_update", "imm_step"]

# Model probabilities are floored here after each update so no hypothesis can
# die permanently and lock the bank.
_WEIGHT_FLOOR = 1e-12

# A merged (mixing) weight below this means the transition structure has
# starved a model completely; mixing would divide by ~0.
_STARVATION_LIMIT = 1e-300


@dataclass
class ImmBank:
    """A weighted bank of (dynamics, measurement) model pairs with per-model beliefs."""

    models: List[Tuple[object, object]]
    transition: np.ndarray
    weights: np.ndarray
    estimates: List[GaussianEstimate]

    def __post_init__(self):
        m = len(self.models)
        if m == 0:
            raise ValueError("bank must contain at least one model")
        self.transition = np.atleast_2d(np.asarray(self.transition, dtype=float))
        if self.transition.shape != (m, m):
            raise ValueError(f"transition matrix must be {m}x{m}")
        if np.any(self.transition < 0):
            raise ValueError("transition probabilities must be non-negative")
        if np.abs(self.transition.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("transition matrix rows must sum to one")
        self.weights = as_vector(self.weights, "weights")
        if self.weights.size != m:
            raise ValueError("one weight per model required")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("model weights must be a probability vector")
        if len(self.estimates) != m:
            raise ValueError("one estimate per model required")
        dims = {e.dim for e in self.estimates}
        if len(dims) != 1:
            raise ValueError("all bank members must share one state dimension")

    @property
    def size(self) -> int:
        return len(self.models)


def imm_mix(bank: ImmBank):
    """Mix the per-model beliefs under the transition prior.

    Returns (mixed_estimates, merged_weights): merged weight k is
    sum_i C[i, k] * w[i], and each mixed belief k is the moment-matched
    combination of the incoming beliefs with weights C[i, k] w[i] / merged[k].

    Raises RuntimeError if a merged weight underflows to effectively zero.
    """
    c = bank.transition
    w = bank.weights
    merged = c.T @ w
    if np.any(merged < _STARVATION_LIMIT):
        raise RuntimeError("model starvation: a merged mixing weight underflowed")
    mixed = []
    for k in range(bank.size):
        lam = c[:, k] * w / merged[k]
        mean = sum(lam[i] * bank.estimates[i].mean for i in range(bank.size))
        cov = sum(
            lam[i] * (bank.estimates[i].cov + np.outer(
                bank.estimates[i].mean - mean, bank.estimates[i].mean - mean))
            for i in range(bank.size)
        )
        mixed.append(GaussianEstimate(mean, symmetrize(cov)))
    return mixed, merged


def _measurement_likelihood(meas, estimate, z):
    if isinstance(meas, LinearMeasurementModel):
        h_mat = meas.H
        predicted = h_mat @ estimate.mean
    else:
        h_mat = np.atleast_2d(np.asarray(meas.jac(estimate.mean), dtype=float))
        predicted = as_vector(meas.h(estimate.mean), "h(x)")
    innovation = z - predicted
    q = symmetrize(h_mat @ estimate.cov @ h_mat.T + meas.sigma_z)
    sign, logdet = np.linalg.slogdet(q)
    if sign <= 0:
        raise np.linalg.LinAlgError("innovation covariance is not positive definite")
    maha = float(innovation @ np.linalg.solve(q, innovation))
    # Unnormalized Gaussian height; the shared (2 pi)^(p/2) factor cancels in
    # the weight normalization.
    return np.exp(-0.5 * (maha + logdet))


def imm_weight_update(bank: ImmBank, posteriors: Sequence[GaussianEstimate], z, merged_weights=None):
    """Reweight the bank's models against a measurement.

    Each model's merged (mixing) weight is multiplied by the Gaussian height
    of the innovation evaluated at the supplied estimate, then the vector is
    normalized and floored at 1e-12.  ``merged_weights`` defaults to the
    transition-mixed weights computed from the bank.
    """
    z = as_vector(z, "z")
    if merged_weights is None:
        merged_weights = bank.transition.T @ bank.weights
    merged_weights = as_vector(merged_weights, "merged_weights")
    lik = np.array([
        _measurement_likelihood(bank.models[k][1], posteriors[k], z)
        for k in range(bank.size)
    ])
    unnorm = lik * merged_weights
    total = unnorm.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise RuntimeError("degenerate model likelihoods: weights cannot be normalized")
    weights = unnorm / total
    weights = np.maximum(weights, _WEIGHT_FLOOR)
    return weights / weights.sum()


def imm_step(bank: ImmBank, u, z, innovation_form: str = "posterior"):
    """One full mixing/filtering/reweighting cycle.

    Per-model filtering dispatches on the model types: linear members run the
    standard linear predict/update, nonlinear members the linearized one.
    ``innovation_form`` selects which estimate the model likelihoods are
    evaluated at: "posterior" (after the measurement update) or "prior"
    (the predicted estimate).

    Returns (new_bank, fused) where fused is the weight-averaged combination
    of the per-model posteriors.
    """
    if innovation_form not in ("posterior", "prior"):
        raise ValueError("innovation_form must be 'posterior' or 'prior'")
    mixed, merged = imm_mix(bank)
    priors = []
    posteriors = []
    for k, (sys, meas) in enumerate(bank.models):
        if isinstance(sys, LinearStateSpace):
            prior = kf_predict(mixed[k], sys, u)
        else:
            prior = ekf_predict(mixed[k], sys, u)
        if isinstance(meas, LinearMeasurementModel):
            post = kf_update(prior, meas, z)
        else:
            post = ekf_update(prior, meas, z)
        priors.append(prior)
        posteriors.append(post)

    reference = posteriors if innovation_form == "posterior" else priors
    weights = imm_weight_update(bank, reference, z, merged_weights=merged)

    mean = sum(weights[k] * posteriors[k].mean for k in range(bank.size))
    cov = sum(
        weights[k] * (posteriors[k].cov + np.outer(
            posteriors[k].mean - mean, posteriors[k].mean - mean))
        for k in range(bank.size)
    )
    fused = GaussianEstimate(mean, symmetrize(cov))
    new_bank = dataclasses.replace(
        bank, weights=weights, estimates=posteriors
    )
    return new_bank, fused
