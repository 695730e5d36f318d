"""Sequential Monte Carlo estimation (importance sampling with resampling).

Proposal callables are vectorized: they receive the whole (N, d) particle
array and return per-particle values in one call.  The sampling callable also
receives the set's random generator explicitly, so runs with the same seed
reproduce bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .statespace import as_vector

__all__ = [
    "ParticleSet",
    "ProposalModel",
    "effective_sample_size",
    "resample",
    "pf_step",
    "sis_step",
]

# Below this, the largest unnormalized weight is close enough to the floating
# point floor that a rescale (by the max) is applied before normalizing.
_UNDERFLOW_LIMIT = 1e-250


@dataclass
class ParticleSet:
    """Weighted particles plus the random generator that drives them."""

    particles: np.ndarray         # (count, dim)
    weights: np.ndarray           # (count,)
    rng_state: np.random.Generator

    def __post_init__(self):
        self.particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        self.weights = as_vector(self.weights, "weights")
        if self.particles.shape[0] != self.weights.size:
            raise ValueError("particle count does not match weight count")
        if self.weights.size == 0:
            raise ValueError("particle set must not be empty")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and non-negative")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be normalized")

    @property
    def size(self) -> int:
        return self.weights.size


@dataclass
class ProposalModel:
    """Callbacks describing the proposal and the target factors.

    sample(particles, context, rng) -> new particles (N, d)
    likelihood(z, particles) -> measurement likelihoods (N,)
    transition_density(new, old, context) -> dynamics densities (N,), optional
    density(new, old, context) -> proposal densities (N,), optional

    When ``transition_density``/``density`` are omitted, the proposal is taken
    to be the transition itself and their ratio drops out of the weights.
    """

    sample: Callable
    likelihood: Callable
    transition_density: Optional[Callable] = None
    density: Optional[Callable] = None


def effective_sample_size(weights) -> float:
    """1 / sum(w^2): the equivalent number of evenly weighted particles."""
    w = as_vector(weights, "weights")
    total = float(w @ w)
    if total <= 0.0 or not np.isfinite(total):
        raise ValueError("weights must contain positive mass")
    return 1.0 / total


def resample(pset: ParticleSet, method: str = "multinomial") -> ParticleSet:
    """Draw a fresh evenly weighted set from the current weighted one.

    "multinomial" draws indices independently in proportion to weight;
    "systematic" uses a single uniform offset with stratified positions.
    """
    n = pset.size
    if method == "multinomial":
        idx = pset.rng_state.choice(n, size=n, p=pset.weights)
    elif method == "systematic":
        positions = (pset.rng_state.uniform(0.0, 1.0 / n) + np.arange(n) / n)
        idx = np.minimum(np.searchsorted(np.cumsum(pset.weights), positions), n - 1)
    else:
        raise ValueError(f"unknown resampling method '{method}'")
    return ParticleSet(pset.particles[idx], np.full(n, 1.0 / n), pset.rng_state)


def _combine_weights(old_weights, factors):
    factors = np.asarray(factors, dtype=float)
    if factors.shape != old_weights.shape:
        raise ValueError("weight factors must be one value per particle")
    if np.any(factors < 0) or not np.all(np.isfinite(factors)):
        raise ValueError("weight factors must be finite and non-negative")
    weights = old_weights * factors
    peak = weights.max()
    if peak == 0.0:
        raise RuntimeError(
            "particle degeneracy: every weight underflowed to zero"
        )
    if peak < _UNDERFLOW_LIMIT:
        weights = weights / peak
    return weights / weights.sum()


def pf_step(
    pset: ParticleSet,
    proposal: ProposalModel,
    z,
    n_thr: float,
    context=None,
    resample_method: str = "multinomial",
) -> ParticleSet:
    """One propagate/weight/(conditionally resample) cycle.

    Particles move through ``proposal.sample``; weights are multiplied by the
    measurement likelihood, and additionally by the transition/proposal density
    ratio when the proposal differs from the dynamics.  Resampling triggers
    when the effective sample size drops below ``n_thr``.

    Parameters
    ----------
    pset : ParticleSet
    proposal : ProposalModel
    z : array_like
        Measurement for this step.
    n_thr : float
        Effective-sample-size threshold for resampling.
    context : optional
        Opaque value forwarded to the proposal callbacks (e.g. the control).
    resample_method : str
        "multinomial" (default) or "systematic".
    """
    z = as_vector(z, "z")
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement contains non-finite entries")
    moved = np.atleast_2d(np.asarray(
        proposal.sample(pset.particles, context, pset.rng_state), dtype=float
    ))
    if moved.shape != pset.particles.shape:
        raise ValueError("proposal.sample must preserve the particle array shape")

    factors = np.asarray(proposal.likelihood(z, moved), dtype=float)
    if proposal.transition_density is not None and proposal.density is not None:
        num = np.asarray(proposal.transition_density(moved, pset.particles, context), dtype=float)
        den = np.asarray(proposal.density(moved, pset.particles, context), dtype=float)
        factors = factors * num / den

    weights = _combine_weights(pset.weights, factors)
    out = ParticleSet(moved, weights, pset.rng_state)
    if effective_sample_size(weights) < n_thr:
        out = resample(out, method=resample_method)
    return out


def sis_step(
    pset: ParticleSet,
    proposal: ProposalModel,
    target_density_ratio: Callable,
    n_thr: Optional[float] = None,
    context=None,
    resample_method: str = "multinomial",
) -> ParticleSet:
    """Plain sequential importance sampling with a caller-supplied weight ratio.

    ``target_density_ratio(new, old)`` must return the full per-particle
    target/proposal factor; resampling is optional and only happens when
    ``n_thr`` is given and the effective sample size falls below it.
    """
    moved = np.atleast_2d(np.asarray(
        proposal.sample(pset.particles, context, pset.rng_state), dtype=float
    ))
    if moved.shape != pset.particles.shape:
        raise ValueError("proposal.sample must preserve the particle array shape")
    factors = np.asarray(target_density_ratio(moved, pset.particles), dtype=float)
    weights = _combine_weights(pset.weights, factors)
    out = ParticleSet(moved, weights, pset.rng_state)
    if n_thr is not None and effective_sample_size(weights) < n_thr:
        out = resample(out, method=resample_method)
    return out
