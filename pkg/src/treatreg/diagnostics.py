"""Closed-form bias of ridge-regularized treatment effects, exogeneity and
moment checks."""

from __future__ import annotations

import numpy as np


def _bias(r: np.ndarray, X: np.ndarray, beta: np.ndarray) -> float:
    rr = float(r @ r)
    if rr <= 0:
        raise ValueError("treatment vector is identically zero")
    c = (r @ X) / rr                      # univariate slopes of each X_j on r
    X_hat = np.outer(r, c)
    M = np.eye(X.shape[1]) + X.T @ (X - X_hat)
    try:
        return float(c @ np.linalg.solve(M, beta))
    except np.linalg.LinAlgError:
        raise ValueError("singular inner matrix I + X^T (X - X_hat)") from None


def ridge_alpha_bias(z, X, beta) -> float:
    """Bias of the posterior-mean treatment effect with a flat prior on alpha,
    a standard normal prior on beta and unit noise variance, for fixed (z, X):

        c (I_p + X^T (X - X_hat_z))^{-1} beta,   c = (z^T z)^{-1} z^T X.

    Positive when the omitted part of X beta is positively aligned with z,
    i.e. shrinking beta pushes its effect onto alpha.
    """
    z = np.asarray(z, dtype=float).ravel()
    X = np.asarray(X, dtype=float).reshape(len(z), -1)
    return _bias(z, X, np.asarray(beta, dtype=float))


def reparam_alpha_bias(z, X, beta_c, beta_d) -> float:
    """As :func:`ridge_alpha_bias` with z replaced by r = z - X beta_c and the
    prior placed on beta_d."""
    z = np.asarray(z, dtype=float).ravel()
    X = np.asarray(X, dtype=float).reshape(len(z), -1)
    r = z - X @ np.asarray(beta_c, dtype=float)
    return _bias(r, X, np.asarray(beta_d, dtype=float))


def ridge_estimator_expectation(z, X, alpha, beta) -> float:
    """E[alpha_hat] - alpha for the closed-form estimator, computed by writing
    alpha_hat as a linear map of y and applying it to E[y] = alpha z + X beta.

    Independent of :func:`ridge_alpha_bias`; used to check it.
    """
    z = np.asarray(z, dtype=float).ravel()
    X = np.asarray(X, dtype=float).reshape(len(z), -1)
    W = np.column_stack([z, X])
    P = np.zeros((W.shape[1], W.shape[1]))
    P[1:, 1:] = np.eye(X.shape[1])
    A = np.linalg.solve(W.T @ W + P, W.T)       # posterior mean = A y
    return float(A[0] @ (alpha * z + X @ np.asarray(beta, dtype=float)) - alpha)


def residual_treatment_cov(residuals, z) -> float:
    r = np.asarray(residuals, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if r.size != z.size:
        raise ValueError("residuals and z differ in length")
    if r.size < 2:
        raise ValueError("need at least two observations")
    return float(np.cov(r, z, ddof=1)[0, 1])


def moment_identity_gap(y, z, x, alpha, beta_c, beta_d) -> float:
    """Sample gap in alpha = E(YZ) - E(X^2) beta_c beta_d for one confounder.

    The identity assumes unit selection-noise variance, var(Z - X beta_c) = 1.
    """
    y, z = np.asarray(y, dtype=float).ravel(), np.asarray(z, dtype=float).ravel()
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise ValueError("moment identity is defined for a single control")
        x = x[:, 0]
    return float(np.mean(y * z) - np.mean(x * x) * beta_c * beta_d - alpha)
