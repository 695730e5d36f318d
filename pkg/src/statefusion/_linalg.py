"""Small shared numeric helpers used across the estimators."""

from __future__ import annotations

import numpy as np


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return the symmetric part 0.5*(M + M^T)."""
    return 0.5 * (m + m.T)


def spd_inverse(m: np.ndarray) -> np.ndarray:
    """Invert a symmetric positive-definite matrix via a linear solve."""
    out = np.linalg.solve(m, np.eye(m.shape[0]))
    return symmetrize(out)


def blkdiag(*mats: np.ndarray) -> np.ndarray:
    mats = [np.atleast_2d(np.asarray(m, dtype=float)) for m in mats]
    n = sum(m.shape[0] for m in mats)
    p = sum(m.shape[1] for m in mats)
    out = np.zeros((n, p))
    r = c = 0
    for m in mats:
        out[r:r + m.shape[0], c:c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


def quasi_sqrt(m: np.ndarray) -> np.ndarray:
    """Lower-triangular square root S with S @ S.T == M.

    Falls back to a jittered factorization (1e-12 * mean diagonal) when M sits
    on the boundary of the positive-semidefinite cone; an all-zero matrix maps
    to an all-zero root so degenerate inputs collapse cleanly.
    """
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix square root of non-finite input")
    if np.abs(m).max() == 0.0:
        return np.zeros_like(m)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(m) / m.shape[0]
        if jitter <= 0.0:
            raise
        return np.linalg.cholesky(m + jitter * np.eye(m.shape[0]))


def gaussian_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    d = np.asarray(x, dtype=float) - np.asarray(mean, dtype=float)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise np.linalg.LinAlgError("covariance is not positive definite")
    maha = float(d @ np.linalg.solve(cov, d))
    return -0.5 * (maha + logdet + d.size * np.log(2.0 * np.pi))


def gaussian_pdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    return float(np.exp(gaussian_logpdf(x, mean, cov)))


def numeric_rank(m: np.ndarray, rank_tol: float | None = None) -> int:
    """Numeric rank from singular values; tolerance is relative to the largest."""
    sv = np.linalg.svd(np.atleast_2d(m), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    tol = (1e-8 if rank_tol is None else rank_tol) * sv[0]
    return int(np.count_nonzero(sv > tol))
