"""Continuous-time estimation and estimator-in-the-loop control.

Everything here advances by explicit forward-Euler steps: these estimators
model analog hardware (or a fixed-rate digital emulation of it), so the
integration step is part of the contract rather than an internal detail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ._linalg import symmetrize
from .statespace import (
    GaussianEstimate,
    LinearMeasurementModel,
    LinearStateSpace,
    as_vector,
    check_covariance,
    check_finite,
    is_observable,
)

__all__ = [
    "ContinuousEstimatorState",
    "kalman_bucy_step",
    "riccati_stationary",
    "luenberger_step",
    "integrated_control_step",
    "augmented_stability",
]


@dataclass
class ContinuousEstimatorState:
    """State of a continuous-time estimator: mean, optional covariance, clock."""

    x_hat: np.ndarray
    sigma_hat: Optional[np.ndarray] = None
    t: float = 0.0

    def __post_init__(self):
        self.x_hat = as_vector(self.x_hat, "x_hat")
        check_finite(self.x_hat, "x_hat")
        if self.sigma_hat is not None:
            self.sigma_hat = check_covariance(self.sigma_hat, "sigma_hat")
            if self.sigma_hat.shape[0] != self.x_hat.size:
                raise ValueError("sigma_hat dimension must match x_hat")


def _validate_step_inputs(model, meas, z, dt):
    if not dt > 0:
        raise ValueError("dt must be positive")
    z = as_vector(z, "z")
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement contains non-finite entries")
    if z.size != meas.H.shape[0]:
        raise ValueError("measurement dimension does not match H rows")
    return z


def kalman_bucy_step(
    state: ContinuousEstimatorState,
    model: LinearStateSpace,
    meas: LinearMeasurementModel,
    sigma_e,
    u,
    z,
    dt: float,
) -> ContinuousEstimatorState:
    """One Euler step of the continuous-time optimal filter.

    The mean integrates the model with the innovation feedback
    sigma_hat H^T sigma_z^-1 (z - H x_hat); the covariance integrates the
    differential Riccati flow with drive ``sigma_e``.
    """
    z = _validate_step_inputs(model, meas, z, dt)
    if state.sigma_hat is None:
        raise ValueError("kalman_bucy_step requires a covariance in the estimator state")
    sigma_e = check_covariance(sigma_e, "sigma_e")
    u = np.zeros(model.control_dim) if u is None else as_vector(u, "u")

    x = state.x_hat
    p = state.sigma_hat
    h, r = meas.H, meas.sigma_z
    gain = p @ h.T @ np.linalg.solve(r, np.eye(r.shape[0]))
    dx = model.A @ x + model.B @ u + gain @ (z - h @ x)
    dp = model.A @ p + p @ model.A.T - p @ h.T @ np.linalg.solve(r, h @ p) + sigma_e
    return ContinuousEstimatorState(
        x_hat=x + dt * dx,
        sigma_hat=symmetrize(p + dt * dp),
        t=state.t + dt,
    )


def riccati_stationary(
    model: LinearStateSpace,
    meas: LinearMeasurementModel,
    sigma_e,
    tol: float = 1e-9,
    dt: float = 1e-3,
    max_steps: int = 10_000_000,
) -> np.ndarray:
    """Stationary covariance of the continuous-time filter.

    Integrates the differential Riccati flow from the identity until the
    time derivative is negligible (relative to the covariance and in absolute
    terms), then sanity-checks that the algebraic fixed-point residual is small
    and that the implied closed-loop matrix A - sigma H^T sigma_z^-1 H is
    stable.

    Raises
    ------
    ValueError
        If (A, H) is not observable (the flow would not settle to a unique
        positive-definite point).
    RuntimeError
        If the flow fails to converge within ``max_steps`` or the fixed point
        fails the stability check.
    """
    if not is_observable(model.A, meas.H):
        raise ValueError("(A, H) must be observable for a stationary covariance to exist")
    sigma_e = check_covariance(sigma_e, "sigma_e")
    a = model.A
    h, r = meas.H, meas.sigma_z
    n = a.shape[0]
    p = np.eye(n)
    for _ in range(max_steps):
        dp = a @ p + p @ a.T - p @ h.T @ np.linalg.solve(r, h @ p) + sigma_e
        residual = np.linalg.norm(dp)
        # Relative to the covariance while it has size, absolute once it has
        # decayed away (with no drive the flow heads to zero and a purely
        # relative test would never fire).
        if residual < tol * max(np.linalg.norm(p), 1.0):
            break
        p = symmetrize(p + dt * dp)
    else:
        raise RuntimeError("Riccati flow did not converge; reduce dt or loosen tol")

    closed_loop = a - p @ h.T @ np.linalg.solve(r, h)
    if np.linalg.eigvals(closed_loop).real.max() >= 0.0:
        raise RuntimeError("stationary point is not stabilizing")
    return symmetrize(p)


def luenberger_step(
    state: ContinuousEstimatorState,
    model: LinearStateSpace,
    meas: LinearMeasurementModel,
    L,
    u,
    z,
    dt: float,
) -> ContinuousEstimatorState:
    """One Euler step of a fixed-gain observer: dx = A x + B u + L (z - H x)."""
    z = _validate_step_inputs(model, meas, z, dt)
    L = np.atleast_2d(np.asarray(L, dtype=float))
    u = np.zeros(model.control_dim) if u is None else as_vector(u, "u")
    x = state.x_hat
    dx = model.A @ x + model.B @ u + L @ (z - meas.H @ x)
    return ContinuousEstimatorState(
        x_hat=x + dt * dx, sigma_hat=state.sigma_hat, t=state.t + dt
    )


def integrated_control_step(
    state: ContinuousEstimatorState,
    model: LinearStateSpace,
    meas: LinearMeasurementModel,
    K,
    L,
    z,
    dt: float,
) -> Tuple[ContinuousEstimatorState, np.ndarray]:
    """Observer + state-feedback loop advanced by one Euler step.

    The estimate integrates dx = (A - B K^T - L H) x + L z; the control
    u = -K^T x is evaluated at the *updated* estimate and returned for the
    caller to apply to the plant.
    """
    z = _validate_step_inputs(model, meas, z, dt)
    k_mat = np.asarray(K, dtype=float)
    if k_mat.ndim == 1:
        k_mat = k_mat.reshape(-1, 1)
    L = np.atleast_2d(np.asarray(L, dtype=float))
    x = state.x_hat
    closed = model.A - model.B @ k_mat.T - L @ meas.H
    x_new = x + dt * (closed @ x + L @ z)
    u = -(k_mat.T @ x_new)
    new_state = ContinuousEstimatorState(
        x_hat=x_new, sigma_hat=state.sigma_hat, t=state.t + dt
    )
    return new_state, u


def _refined_spectrum(closed_loop: np.ndarray) -> np.ndarray:
    """Eigenvalues of a closed-loop matrix with repeated-root clusters averaged.

    A defective eigenvalue of multiplicity m splits numerically into a
    symmetric star of radius ~(eps*norm)^(1/m); the cluster mean cancels the
    leading-order splitting.  Well-separated eigenvalues form singleton
    clusters and pass through unchanged.
    """
    vals = np.linalg.eigvals(closed_loop).astype(complex)
    n = vals.size
    norm = max(1.0, np.linalg.norm(closed_loop))
    radius = 8.0 * (np.finfo(float).eps * norm) ** (1.0 / n)
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    refined = np.empty_like(vals)
    start = 0
    for i in range(1, n + 1):
        if i == n or abs(vals[i] - vals[i - 1]) > radius:
            cluster = vals[start:i]
            mean = cluster.mean()
            if abs(mean.imag) <= radius:  # conjugate-closed cluster
                mean = complex(mean.real, 0.0)
            refined[start:i] = mean
            start = i
    order = np.lexsort((refined.imag, refined.real))
    return refined[order]


def augmented_stability(A, B, K, L, H):
    """Eigenvalues of the combined control/estimation loop.

    By the separation property the closed loop's spectrum is the union of the
    controller spectrum eig(A - B K^T) and the observer spectrum eig(A - L H).
    Returns (controller_eigs, observer_eigs, stable) with each spectrum sorted
    by real part then imaginary part.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    L = np.atleast_2d(np.asarray(L, dtype=float))
    k_mat = np.asarray(K, dtype=float)
    if k_mat.ndim == 1:
        k_mat = k_mat.reshape(-1, 1)

    controller = _refined_spectrum(A - B @ k_mat.T)
    observer = _refined_spectrum(A - L @ H)
    stable = bool(controller.real.max() < 0.0 and observer.real.max() < 0.0)
    return controller, observer, stable
