"""Dense Gaussian linear-algebra helpers.

Thin wrappers around Cholesky factorizations so every module spells SPD
solves, log-determinants and density evaluations the same way.  All inputs
are plain ``numpy`` arrays; covariance arguments must be symmetric positive
definite or ``NumericalError`` is raised.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import InvalidInput, NumericalError

_LOG_2PI = float(np.log(2.0 * np.pi))


def as_spd(mat: np.ndarray, name: str = "covariance") -> np.ndarray:
    """Validate shape/symmetry of an SPD candidate and return a C-contiguous copy."""
    arr = np.asarray(mat, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {arr.shape}")
    if not np.allclose(arr, arr.T, rtol=0.0, atol=1e-9 * (1.0 + np.abs(arr).max())):
        raise InvalidInput(f"{name} must be symmetric")
    return np.ascontiguousarray(0.5 * (arr + arr.T))


def chol_lower(mat: np.ndarray, name: str = "covariance") -> np.ndarray:
    """Lower Cholesky factor, mapping LinAlgError onto NumericalError."""
    try:
        return np.linalg.cholesky(as_spd(mat, name))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{name} is not positive definite") from exc


def spd_solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve mat @ x = rhs for SPD mat."""
    try:
        c, low = cho_factor(as_spd(mat))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("SPD solve failed: matrix not positive definite") from exc
    return cho_solve((c, low), np.asarray(rhs, dtype=float))


def spd_inverse(mat: np.ndarray) -> np.ndarray:
    """Explicit SPD inverse, symmetrized."""
    inv = spd_solve(mat, np.eye(mat.shape[0]))
    return 0.5 * (inv + inv.T)


def spd_logdet(mat: np.ndarray) -> float:
    """log det of an SPD matrix via its Cholesky factor."""
    low = chol_lower(mat)
    return 2.0 * float(np.sum(np.log(np.diag(low))))


def whitener(cov: np.ndarray) -> np.ndarray:
    """Matrix W with W @ W.T = cov^-1 (W = L^-T for cov = L L^T).

    Whitened residuals W.T @ r have identity covariance; stacking them turns a
    weighted least-squares problem into an ordinary one.
    """
    low = chol_lower(cov)
    return solve_triangular(low, np.eye(low.shape[0]), lower=True).T


def gaussian_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """Log density of N(mean, cov) at x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    if x.shape != mean.shape:
        raise InvalidInput(f"point/mean shape mismatch: {x.shape} vs {mean.shape}")
    low = chol_lower(cov)
    diff = solve_triangular(low, x - mean, lower=True)
    logdet = 2.0 * float(np.sum(np.log(np.diag(low))))
    return -0.5 * (diff @ diff + logdet + x.size * _LOG_2PI)


def conditional_gaussian(
    mean: np.ndarray,
    cov: np.ndarray,
    observed_idx: np.ndarray,
    observed_val: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Condition a joint Gaussian on exact values of a subset of coordinates."""
    n = mean.size
    obs = np.asarray(observed_idx, dtype=int)
    keep = np.setdiff1d(np.arange(n), obs)
    if obs.size == 0:
        return mean.copy(), cov.copy()
    s_oo = cov[np.ix_(obs, obs)]
    s_ko = cov[np.ix_(keep, obs)]
    gain = s_ko @ spd_inverse(s_oo)
    cond_mean = mean[keep] + gain @ (observed_val - mean[obs])
    cond_cov = cov[np.ix_(keep, keep)] - gain @ s_ko.T
    return cond_mean, 0.5 * (cond_cov + cond_cov.T)
