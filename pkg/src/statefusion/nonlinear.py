"""Nonlinear Gaussian filtering: linearized and sigma-point estimators.

The sigma-point steps work on an augmented state [x, control noise, state
noise] so noise enters the nonlinear map exactly where it acts, rather than
being linearized in.  A config switch moves the state noise back to the
classic additive path when that behaviour is wanted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._linalg import blkdiag, quasi_sqrt, symmetrize
from .statespace import (
    GaussianEstimate,
    NonlinearMeasurementModel,
    NonlinearSystemModel,
    as_vector,
    check_finite,
)

__all__ = [
    "ekf_predict",
    "ekf_update",
    "SigmaPointSet",
    "UkfConfig",
    "ut_sigma_points",
    "ukf_step",
    "cubature_points",
    "ckf_step",
]

_COND_LIMIT = 1e12


def ekf_predict(est: GaussianEstimate, model: NonlinearSystemModel, u=None) -> GaussianEstimate:
    """First-order propagation through nonlinear dynamics.

    The mean passes through g exactly; the covariance is propagated through
    the state and control Jacobians, with the optional additive state noise
    on top.
    """
    if u is None:
        u = np.zeros(model.control_dim)
    else:
        u = as_vector(u, "u")
        check_finite(u, "u")
    mean = as_vector(model.g(est.mean, u), "predicted state")
    if not np.all(np.isfinite(mean)):
        raise ValueError("dynamics returned a non-finite state")
    jx = np.atleast_2d(np.asarray(model.jac_x(est.mean, u), dtype=float))
    ju = np.atleast_2d(np.asarray(model.jac_u(est.mean, u), dtype=float))
    cov = jx @ est.cov @ jx.T + ju @ model.sigma_u @ ju.T
    if model.sigma_eps is not None:
        cov = cov + model.sigma_eps
    return GaussianEstimate(mean, symmetrize(cov))


def ekf_update(est: GaussianEstimate, meas: NonlinearMeasurementModel, z) -> GaussianEstimate:
    """First-order measurement update against z = h(x) + noise."""
    z = as_vector(z, "z")
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement contains non-finite entries")
    jac = np.atleast_2d(np.asarray(meas.jac(est.mean), dtype=float))
    predicted = as_vector(meas.h(est.mean), "h(x)")
    if predicted.size != z.size:
        raise ValueError("measurement dimension does not match h output")
    innovation_cov = symmetrize(jac @ est.cov @ jac.T + meas.sigma_z)
    if np.linalg.cond(innovation_cov) >= _COND_LIMIT:
        raise np.linalg.LinAlgError("innovation covariance is numerically singular")
    gain = np.linalg.solve(innovation_cov, jac @ est.cov).T
    mean = est.mean + gain @ (z - predicted)
    cov = (np.eye(est.dim) - gain @ jac) @ est.cov
    return GaussianEstimate(mean, symmetrize(cov))


@dataclass
class SigmaPointSet:
    """Deterministic sample points with matching weights."""

    points: np.ndarray   # (count, dim)
    weights: np.ndarray  # (count,)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.weights = as_vector(self.weights, "weights")
        if self.points.shape[0] != self.weights.size:
            raise ValueError("point count does not match weight count")
        check_finite(self.points, "points")
        check_finite(self.weights, "weights")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("sigma-point weights must sum to one")


@dataclass
class UkfConfig:
    """Tuning for the unscented step.

    ``kappa`` defaults to 3 - n for the augmented dimension n.  With
    ``additive_process_noise`` the state noise is added to the predicted
    covariance instead of being sampled as an augmented block.
    """

    kappa: Optional[float] = None
    additive_process_noise: bool = False


def ut_sigma_points(est: GaussianEstimate, kappa: float) -> SigmaPointSet:
    """Symmetric 2n+1 unscented points for a Gaussian.

    The center point carries weight kappa/(n+kappa); the remaining 2n points
    sit at mean +/- columns of a square root of (n+kappa) * cov, each with
    weight 1/(2(n+kappa)).
    """
    n = est.dim
    if n + kappa <= 0:
        raise ValueError(f"kappa must satisfy n + kappa > 0 (n={n}, kappa={kappa})")
    root = quasi_sqrt((n + kappa) * est.cov)
    points = np.empty((2 * n + 1, n))
    points[0] = est.mean
    for j in range(n):
        points[1 + j] = est.mean + root[:, j]
        points[1 + n + j] = est.mean - root[:, j]
    weights = np.full(2 * n + 1, 1.0 / (2.0 * (n + kappa)))
    weights[0] = kappa / (n + kappa)
    return SigmaPointSet(points, weights)


def cubature_points(est: GaussianEstimate) -> SigmaPointSet:
    """Spherical 2n cubature points: mean +/- columns of sqrt(n * cov), equal weights."""
    n = est.dim
    root = quasi_sqrt(n * est.cov)
    points = np.empty((2 * n, n))
    for j in range(n):
        points[j] = est.mean + root[:, j]
        points[n + j] = est.mean - root[:, j]
    return SigmaPointSet(points, np.full(2 * n, 1.0 / (2.0 * n)))


def _augment(est, sys, include_state_noise):
    n_x = est.dim
    n_u = sys.control_dim
    blocks = [est.cov, sys.sigma_u]
    if include_state_noise:
        blocks.append(sys.sigma_eps)
    mean = np.concatenate([est.mean, np.zeros(sum(b.shape[0] for b in blocks[1:]))])
    return GaussianEstimate(mean, blkdiag(*blocks)), n_x, n_u


def _propagate(points, weights, sys, u, n_x, n_u, include_state_noise):
    propagated = np.empty((points.shape[0], n_x))
    for i, pt in enumerate(points):
        state = pt[:n_x]
        du = pt[n_x:n_x + n_u]
        xi = as_vector(sys.g(state, u + du), "predicted state")
        if include_state_noise:
            xi = xi + pt[n_x + n_u:]
        propagated[i] = xi
    if not np.all(np.isfinite(propagated)):
        raise ValueError("dynamics returned a non-finite state")
    mean = weights @ propagated
    centered = propagated - mean
    cov = (weights[:, None] * centered).T @ centered
    return propagated, mean, symmetrize(cov)


def _measurement_update(points, weights, pred_mean, pred_cov, meas, z):
    predicted_meas = np.array([as_vector(meas.h(pt), "h(x)") for pt in points])
    z_mean = weights @ predicted_meas
    dz = predicted_meas - z_mean
    dx = points - pred_mean
    innovation_cov = symmetrize(meas.sigma_z + (weights[:, None] * dz).T @ dz)
    cross_cov = (weights[:, None] * dx).T @ dz
    gain = np.linalg.solve(innovation_cov, cross_cov.T).T
    mean = pred_mean + gain @ (z - z_mean)
    cov = pred_cov - gain @ innovation_cov @ gain.T
    return GaussianEstimate(mean, symmetrize(cov))


def _ukf_predict(est, sys, u, cfg):
    """Unscented prediction stage; returns the propagated cloud and moments."""
    include_state_noise = sys.sigma_eps is not None and not cfg.additive_process_noise
    augmented, n_x, n_u = _augment(est, sys, include_state_noise)
    kappa = cfg.kappa if cfg.kappa is not None else 3.0 - augmented.dim
    pts = ut_sigma_points(augmented, kappa)
    propagated, pred_mean, pred_cov = _propagate(
        pts.points, pts.weights, sys, u, n_x, n_u, include_state_noise
    )
    if cfg.additive_process_noise and sys.sigma_eps is not None:
        pred_cov = symmetrize(pred_cov + sys.sigma_eps)
    return propagated, pts.weights, pred_mean, pred_cov


def ukf_step(
    est: GaussianEstimate,
    sys: NonlinearSystemModel,
    meas: NonlinearMeasurementModel,
    u,
    z,
    config: Optional[UkfConfig] = None,
) -> GaussianEstimate:
    """One unscented predict/update cycle.

    The belief is augmented with the control-noise block (and the state-noise
    block unless the config routes it additively), sampled with symmetric
    unscented points, pushed through the dynamics, and the same propagated
    points are reused to form the measurement statistics for the update.  On
    the additive-noise path the points are redrawn from the predicted belief
    instead, so the update sees the noise that was added to the covariance.

    Parameters
    ----------
    est, sys, meas : belief and models.
    u : array_like
        Commanded control (noise-free part).
    z : array_like
        Measurement vector.
    config : UkfConfig, optional
        kappa override and noise-path switch.
    """
    cfg = config or UkfConfig()
    z = as_vector(z, "z")
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement contains non-finite entries")
    u = np.zeros(sys.control_dim) if u is None else as_vector(u, "u")

    propagated, weights, pred_mean, pred_cov = _ukf_predict(est, sys, u, cfg)
    if cfg.additive_process_noise and sys.sigma_eps is not None:
        # The propagated cloud does not carry the additively injected noise,
        # so resample the predicted belief before forming update statistics.
        kappa = cfg.kappa if cfg.kappa is not None else 3.0 - pred_mean.size
        fresh = ut_sigma_points(GaussianEstimate(pred_mean, pred_cov), kappa)
        propagated, weights = fresh.points, fresh.weights
    return _measurement_update(propagated, weights, pred_mean, pred_cov, meas, z)


def _ckf_predict(est, sys, u):
    """Cubature prediction stage; returns the predicted moments."""
    include_state_noise = sys.sigma_eps is not None
    augmented, n_x, n_u = _augment(est, sys, include_state_noise)
    pts = cubature_points(augmented)
    _, pred_mean, pred_cov = _propagate(
        pts.points, pts.weights, sys, u, n_x, n_u, include_state_noise
    )
    return pred_mean, pred_cov


def ckf_step(
    est: GaussianEstimate,
    sys: NonlinearSystemModel,
    meas: NonlinearMeasurementModel,
    u,
    z,
) -> GaussianEstimate:
    """One cubature predict/update cycle.

    Same augmentation as the unscented step but with the 2n equal-weight
    cubature rule (no center point).  After prediction the points are redrawn
    from the predicted Gaussian before the measurement statistics are formed,
    so the update never reuses the propagated cloud.
    """
    z = as_vector(z, "z")
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement contains non-finite entries")
    u = np.zeros(sys.control_dim) if u is None else as_vector(u, "u")

    pred_mean, pred_cov = _ckf_predict(est, sys, u)

    # Redraw cubature points from the predicted belief for the update stage.
    fresh = cubature_points(GaussianEstimate(pred_mean, pred_cov))
    return _measurement_update(fresh.points, fresh.weights, pred_mean, pred_cov, meas, z)
