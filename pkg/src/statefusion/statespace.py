"""State-space model containers, discretization, and structural analysis.

The containers here are deliberately thin: plain dataclasses wrapping numpy
arrays, with validation at construction so the estimators can assume
well-formed inputs (finite entries, symmetric PSD covariances, consistent
dimensions).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ._linalg import numeric_rank

# Type aliases: estimators operate on plain numpy arrays.
RealVector = np.ndarray
RealMatrix = np.ndarray
CovarianceMatrix = np.ndarray

__all__ = [
    "RealVector",
    "RealMatrix",
    "CovarianceMatrix",
    "GaussianEstimate",
    "LinearStateSpace",
    "LinearMeasurementModel",
    "NonlinearSystemModel",
    "NonlinearMeasurementModel",
    "discretize",
    "observability_matrix",
    "is_observable",
    "pole_placement_gain",
    "observer_gain",
]


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 2 and 1 in v.shape:
        v = v.ravel()
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    return v


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    m = np.asarray(x, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {m.shape}")
    return m


def check_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")


def check_covariance(m, name: str = "covariance") -> np.ndarray:
    """Validate a symmetric positive-semidefinite matrix and return it."""
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    check_finite(m, name)
    scale = np.abs(m).max()
    if scale > 0.0 and np.abs(m - m.T).max() > 1e-9 * scale:
        raise ValueError(f"{name} is not symmetric")
    eigs = np.linalg.eigvalsh(0.5 * (m + m.T))
    if eigs.size and eigs[0] < -1e-9 * max(scale, np.finfo(float).tiny):
        raise ValueError(f"{name} is not positive semidefinite (min eig {eigs[0]:.3e})")
    return m


@dataclass
class GaussianEstimate:
    """A Gaussian belief over the state: mean vector and covariance matrix."""

    mean: RealVector
    cov: CovarianceMatrix

    def __post_init__(self):
        self.mean = as_vector(self.mean, "mean")
        check_finite(self.mean, "mean")
        self.cov = check_covariance(self.cov, "cov")
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise ValueError(
                f"cov shape {self.cov.shape} does not match mean dimension {self.mean.size}"
            )

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass
class LinearStateSpace:
    """Discrete- or continuous-time linear dynamics x' = A x + B u.

    ``sigma_u`` is the control-noise covariance (propagated through B);
    ``sigma_eps`` is an optional additive state-noise covariance applied on top
    of the propagated term during prediction.
    """

    A: RealMatrix
    B: RealMatrix
    sigma_u: CovarianceMatrix
    sigma_eps: Optional[CovarianceMatrix] = None

    def __post_init__(self):
        self.A = as_matrix(self.A, "A")
        self.B = as_matrix(self.B, "B")
        check_finite(self.A, "A")
        check_finite(self.B, "B")
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {self.A.shape}")
        if self.B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got shape {self.B.shape}")
        self.sigma_u = check_covariance(self.sigma_u, "sigma_u")
        if self.sigma_u.shape[0] != self.B.shape[1]:
            raise ValueError("sigma_u dimension must match the number of B columns")
        if self.sigma_eps is not None:
            self.sigma_eps = check_covariance(self.sigma_eps, "sigma_eps")
            if self.sigma_eps.shape[0] != n:
                raise ValueError("sigma_eps dimension must match the state dimension")

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def control_dim(self) -> int:
        return self.B.shape[1]


@dataclass
class LinearMeasurementModel:
    """Linear measurement z = H x + noise with covariance sigma_z."""

    H: RealMatrix
    sigma_z: CovarianceMatrix

    def __post_init__(self):
        self.H = as_matrix(self.H, "H")
        check_finite(self.H, "H")
        self.sigma_z = check_covariance(self.sigma_z, "sigma_z")
        if self.sigma_z.shape[0] != self.H.shape[0]:
            raise ValueError("sigma_z dimension must match the number of H rows")


@dataclass
class NonlinearSystemModel:
    """Nonlinear dynamics x' = g(x, u) with Jacobian callbacks.

    ``jac_x``/``jac_u`` evaluate the state and control Jacobians of ``g`` at a
    given (x, u); ``sigma_u`` is the control-noise covariance and ``sigma_eps``
    an optional additive state-noise covariance.
    """

    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_u: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sigma_u: CovarianceMatrix
    sigma_eps: Optional[CovarianceMatrix] = None

    def __post_init__(self):
        self.sigma_u = check_covariance(self.sigma_u, "sigma_u")
        if self.sigma_eps is not None:
            self.sigma_eps = check_covariance(self.sigma_eps, "sigma_eps")

    @property
    def control_dim(self) -> int:
        return self.sigma_u.shape[0]


@dataclass
class NonlinearMeasurementModel:
    """Nonlinear measurement z = h(x) + noise, with Jacobian callback."""

    h: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    sigma_z: CovarianceMatrix

    def __post_init__(self):
        self.sigma_z = check_covariance(self.sigma_z, "sigma_z")


def discretize(model: LinearStateSpace, dt: float, tol: float = 1e-12):
    """Exact zero-order-hold discretization of continuous linear dynamics.

    Computes the transition matrix ``A* = exp(A dt)`` and the control matrix
    ``B* = Phi(dt) B dt`` where ``Phi(dt) = sum_k A^k dt^k / (k+1)!`` is the
    normalized input integral.  Both series are evaluated on a halved step
    (scaling) until the next term's norm falls below ``tol``, then doubled back
    up using the identities

        Phi(2t) = (I + exp(A t)) Phi(t) / 2,   exp(A 2t) = exp(A t)^2,

    with Phi updated before the exponential is squared.

    Parameters
    ----------
    model : LinearStateSpace
        Continuous-time dynamics (A, B).
    dt : float
        Discretization period, must be positive.
    tol : float
        Truncation threshold for the power series terms.

    Returns
    -------
    (A_star, B_star) : tuple of ndarray
        Discrete transition and control matrices.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    A, B = model.A, model.B
    n = A.shape[0]

    # Scale the step down until ||A tau|| <= 0.5 so the series converges fast.
    norm = np.linalg.norm(A, np.inf)
    doublings = 0
    tau = dt
    while norm * tau > 0.5:
        tau *= 0.5
        doublings += 1

    expm = np.eye(n)
    phi = np.eye(n)
    term = np.eye(n)  # A^k tau^k / k!
    for k in range(1, 200):
        term = term @ A * (tau / k)
        expm = expm + term
        phi = phi + term / (k + 1)
        if np.linalg.norm(term, np.inf) < tol:
            break
    else:
        raise RuntimeError("discretization series did not converge")

    for _ in range(doublings):
        phi = (np.eye(n) + expm) @ phi / 2.0
        expm = expm @ expm

    return expm, phi @ B * dt


def observability_matrix(A, H) -> np.ndarray:
    """Stack [H; HA; ...; HA^(n-1)] for the pair (A, H)."""
    A = as_matrix(A, "A")
    H = np.atleast_2d(np.asarray(H, dtype=float))
    n = A.shape[0]
    if H.shape[1] != n:
        raise ValueError(f"H must have {n} columns, got shape {H.shape}")
    blocks = [H]
    row = H
    for _ in range(n - 1):
        row = row @ A
        blocks.append(row)
    return np.vstack(blocks)


def is_observable(A, H, rank_tol: float | None = None) -> bool:
    """Whether the pair (A, H) is observable, by numeric rank of the stacked map."""
    A = as_matrix(A, "A")
    obs = observability_matrix(A, H)
    return numeric_rank(obs, rank_tol) == A.shape[0]


def _polynomial_from_roots(roots) -> np.ndarray:
    coeffs = np.poly(np.asarray(roots, dtype=complex))
    scale = max(1.0, np.abs(coeffs).max())
    if np.abs(coeffs.imag).max() > 1e-9 * scale:
        raise ValueError("desired eigenvalues must be real or come in conjugate pairs")
    return coeffs.real


def pole_placement_gain(A, b, desired_eigs) -> np.ndarray:
    """Single-input state-feedback gain placing the closed-loop eigenvalues.

    Returns the vector k such that eig(A - b k^T) equals ``desired_eigs``,
    computed from the controllability matrix and the desired characteristic
    polynomial evaluated at A (Ackermann's construction).

    Raises
    ------
    ValueError
        If (A, b) is not controllable or the eigenvalue list is not closed
        under conjugation.
    RuntimeError
        If the placement fails numerically (ill-conditioned controllability).
    """
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    n = A.shape[0]
    if b.size != n:
        raise ValueError(f"b must have dimension {n}, got {b.size}")
    eigs = np.atleast_1d(np.asarray(desired_eigs, dtype=complex))
    if eigs.size != n:
        raise ValueError(f"expected {n} desired eigenvalues, got {eigs.size}")

    ctrb = np.empty((n, n))
    col = b
    ctrb[:, 0] = col
    for k in range(1, n):
        col = A @ col
        ctrb[:, k] = col
    if numeric_rank(ctrb) < n:
        raise ValueError("the pair (A, b) is not controllable")

    coeffs = _polynomial_from_roots(eigs)
    phi = coeffs[0] * np.eye(n)
    for c in coeffs[1:]:
        phi = phi @ A + c * np.eye(n)

    e_last = np.zeros(n)
    e_last[-1] = 1.0
    gain = phi.T @ np.linalg.solve(ctrb.T, e_last)

    # Verify through the characteristic polynomial: repeated (defective)
    # eigenvalues split by ~eps^(1/multiplicity) under any eigensolver, but
    # the coefficients are symmetric functions and stay well conditioned.
    achieved = np.poly(A - np.outer(b, gain))
    if np.iscomplexobj(achieved):
        achieved = achieved.real
    scale = max(1.0, np.abs(coeffs).max())
    if np.abs(achieved - coeffs).max() > 1e-6 * scale:
        raise RuntimeError("pole placement failed numerically")
    return gain


def observer_gain(A, H, desired_eigs, decoupling: Optional[Sequence[Sequence[int]]] = None) -> np.ndarray:
    """Observer gain L placing the eigenvalues of A - L H.

    For a single output this is the dual of ``pole_placement_gain``.  With
    multiple outputs a ``decoupling`` partition must be supplied: one block of
    state indices per output row, the dynamics must be block-diagonal with
    respect to the partition, and each output row may only read its own block.
    Desired eigenvalues are consumed block by block in declaration order.
    """
    A = as_matrix(A, "A")
    H = np.atleast_2d(np.asarray(H, dtype=float))
    n = A.shape[0]
    p = H.shape[0]
    if H.shape[1] != n:
        raise ValueError(f"H must have {n} columns, got shape {H.shape}")
    eigs = np.atleast_1d(np.asarray(desired_eigs, dtype=complex))
    if eigs.size != n:
        raise ValueError(f"expected {n} desired eigenvalues, got {eigs.size}")

    if p == 1:
        gain = pole_placement_gain(A.T, H[0], eigs)
        return gain.reshape(n, 1)

    if decoupling is None:
        raise ValueError("multi-output observer design requires a decoupling partition")
    blocks = [list(blk) for blk in decoupling]
    if len(blocks) != p:
        raise ValueError(f"decoupling must provide one block per output ({p}), got {len(blocks)}")
    flat = sorted(i for blk in blocks for i in blk)
    if flat != list(range(n)):
        raise ValueError("decoupling blocks must partition the state indices exactly")

    scale = max(np.abs(A).max(), 1.0)
    for j, blk in enumerate(blocks):
        rest = [i for i in range(n) if i not in blk]
        if rest and (
            np.abs(A[np.ix_(blk, rest)]).max() > 1e-12 * scale
            or np.abs(A[np.ix_(rest, blk)]).max() > 1e-12 * scale
        ):
            raise ValueError(f"dynamics are not block-diagonal for decoupling block {j}")
        if rest and np.abs(H[j, rest]).max() > 1e-12 * max(np.abs(H).max(), 1.0):
            raise ValueError(f"output {j} reads states outside its decoupling block")
        if np.abs(H[j, blk]).max() == 0.0:
            raise ValueError(f"output {j} does not read any state of its block")

    L = np.zeros((n, p))
    offset = 0
    for j, blk in enumerate(blocks):
        sub_a = A[np.ix_(blk, blk)]
        sub_h = H[j, blk]
        sub_eigs = eigs[offset:offset + len(blk)]
        offset += len(blk)
        if not is_observable(sub_a, sub_h.reshape(1, -1)):
            raise ValueError(f"block {j} is not observable from its output")
        L[blk, j] = pole_placement_gain(sub_a.T, sub_h, sub_eigs)
    return L
