"""Linear recursive estimation: prediction, measurement update, full-state fusion.

The measurement update and the full-state fusion rule are two faces of the
same weighted average; ``kf_update`` with an identity measurement matrix and
``fuse_full`` agree to numerical precision, which the test suite pins down.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._linalg import symmetrize
from .statespace import (
    GaussianEstimate,
    LinearMeasurementModel,
    LinearStateSpace,
    as_vector,
    check_finite,
)

__all__ = [
    "kf_predict",
    "kf_update",
    "fuse_full",
    "ConstantGain",
    "constant_gain_update",
    "alpha_beta_gain",
    "alpha_beta_gamma_gain",
]

# Condition-number ceiling beyond which an innovation covariance is treated as
# numerically singular rather than silently inverted.
_COND_LIMIT = 1e12


def kf_predict(est: GaussianEstimate, model: LinearStateSpace, u=None) -> GaussianEstimate:
    """Propagate a Gaussian belief through linear dynamics.

    The predicted covariance is A @ cov @ A.T + B @ sigma_u @ B.T, plus the
    optional additive ``sigma_eps`` when the model carries one.  ``u`` defaults
    to a zero control vector.
    """
    n = est.dim
    if model.A.shape != (n, n):
        raise ValueError(f"dynamics dimension {model.A.shape[0]} does not match estimate dimension {n}")
    if u is None:
        u = np.zeros(model.control_dim)
    else:
        u = as_vector(u, "u")
        check_finite(u, "u")
        if u.size != model.control_dim:
            raise ValueError(f"control dimension {u.size} does not match B columns {model.control_dim}")
    mean = model.A @ est.mean + model.B @ u
    cov = model.A @ est.cov @ model.A.T + model.B @ model.sigma_u @ model.B.T
    if model.sigma_eps is not None:
        cov = cov + model.sigma_eps
    return GaussianEstimate(mean, symmetrize(cov))


def kf_update(
    est: GaussianEstimate,
    meas: LinearMeasurementModel,
    z,
    joseph: bool = False,
) -> GaussianEstimate:
    """Condition a Gaussian belief on a linear measurement z = H x + noise.

    Parameters
    ----------
    est : GaussianEstimate
        Prior (predicted) belief.
    meas : LinearMeasurementModel
        Measurement matrix and noise covariance.
    z : array_like
        Observed measurement; non-finite entries are rejected.
    joseph : bool
        Use the quadratic (Joseph) covariance form, which preserves symmetry
        and positive-semidefiniteness at slightly higher cost.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the innovation covariance is numerically singular
        (condition number >= 1e12).
    """
    n = est.dim
    if meas.H.shape[1] != n:
        raise ValueError(f"H has {meas.H.shape[1]} columns but the state dimension is {n}")
    z = as_vector(z, "z")
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement contains non-finite entries")
    if z.size != meas.H.shape[0]:
        raise ValueError(f"measurement dimension {z.size} does not match H rows {meas.H.shape[0]}")

    innovation_cov = symmetrize(meas.H @ est.cov @ meas.H.T + meas.sigma_z)
    if np.linalg.cond(innovation_cov) >= _COND_LIMIT:
        raise np.linalg.LinAlgError("innovation covariance is numerically singular")
    gain = np.linalg.solve(innovation_cov, meas.H @ est.cov).T
    mean = est.mean + gain @ (z - meas.H @ est.mean)
    if joseph:
        ikh = np.eye(n) - gain @ meas.H
        cov = ikh @ est.cov @ ikh.T + gain @ meas.sigma_z @ gain.T
    else:
        cov = (np.eye(n) - gain @ meas.H) @ est.cov
    return GaussianEstimate(mean, symmetrize(cov))


def fuse_full(e1: GaussianEstimate, e2: GaussianEstimate) -> GaussianEstimate:
    """Fuse two independent full-state estimates of the same quantity.

    Information-weighted average: the fused inverse covariance is the sum of
    the input inverse covariances, and each mean is weighted by its
    information matrix.  Exactly symmetric in its arguments.
    """
    if e1.dim != e2.dim:
        raise ValueError("estimates have different dimensions")
    eye = np.eye(e1.dim)
    info1 = np.linalg.solve(e1.cov, eye)
    info2 = np.linalg.solve(e2.cov, eye)
    cov = symmetrize(np.linalg.solve(info1 + info2, eye))
    mean = cov @ (info1 @ e1.mean + info2 @ e2.mean)
    return GaussianEstimate(mean, cov)


@dataclass
class ConstantGain:
    """A fixed update gain K (state dim x measurement dim)."""

    K: np.ndarray

    def __post_init__(self):
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        check_finite(self.K, "K")


def alpha_beta_gain(alpha: float, beta: float, dt: float) -> ConstantGain:
    """Position/velocity tracker gain [alpha, beta/dt] for scalar position measurements."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return ConstantGain([[alpha], [beta / dt]])


def alpha_beta_gamma_gain(alpha: float, beta: float, gamma: float, dt: float) -> ConstantGain:
    """Position/velocity/acceleration tracker gain [alpha, beta/dt, gamma/(2 dt^2)]."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return ConstantGain([[alpha], [beta / dt], [gamma / (2.0 * dt * dt)]])


def constant_gain_update(mean, gain: ConstantGain, H, z) -> np.ndarray:
    """Mean-only measurement update x + K (z - H x) with a fixed gain.

    Constant-gain trackers carry no covariance; only the corrected mean is
    returned.
    """
    mean = as_vector(mean, "mean")
    H = np.atleast_2d(np.asarray(H, dtype=float))
    z = as_vector(z, "z")
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement contains non-finite entries")
    if gain.K.shape != (mean.size, z.size):
        raise ValueError(
            f"gain shape {gain.K.shape} does not match state/measurement dimensions "
            f"({mean.size}, {z.size})"
        )
    return mean + gain.K @ (z - H @ mean)
