"""Prior log-densities and g-prior marginal likelihoods.

The shrinkage prior is the log-kernel horseshoe proxy

    pi(b | v) ∝ (1/v) log(1 + 4 / (b/v)^2),    v ~ C+(0, 1),

evaluated coefficient-wise and summed. Densities are unnormalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG4 = np.log(4.0)
BETA_FLOOR = 1e-300
G_CAP = 1e8


@dataclass(frozen=True)
class ShrinkagePrior:
    v: float = 1.0

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError("global scale v must be positive")

    def logpdf(self, beta) -> float:
        return log_shrinkage_density(beta, self.v)


def _log_log1p_exp(t):
    """log(log(1 + exp(t))) without overflow or underflow."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    hi, lo = t > 35.0, t < -35.0
    mid = ~(hi | lo)
    out[hi] = np.log(t[hi] + np.log1p(np.exp(-t[hi])))
    out[lo] = t[lo]
    out[mid] = np.log(np.log1p(np.exp(t[mid])))
    return out


def log_shrinkage_density(beta, v: float) -> float:
    """Sum over coefficients of ``log log(1 + 4 v^2 / b^2) - log v``.

    Exact zeros are clamped to ``1e-300`` so the log-singularity at the origin
    stays finite.
    """
    if not v > 0:
        raise ValueError("global scale v must be positive")
    b = np.maximum(np.abs(np.atleast_1d(np.asarray(beta, dtype=float))), BETA_FLOOR)
    lv = np.log(v)
    t = LOG4 + 2.0 * (lv - np.log(b))
    return float(np.sum(_log_log1p_exp(t)) - b.size * lv)


def log_half_cauchy(v: float) -> float:
    if not v > 0:
        raise ValueError("v must be positive")
    return float(np.log(2.0 / np.pi) - np.log1p(v * v))


@dataclass(frozen=True)
class ModelIndicator:
    """Inclusion vector for point-mass selection priors."""

    included: np.ndarray
    p_max: int

    def __post_init__(self):
        inc = np.asarray(self.included, dtype=bool)
        if inc.sum() > self.p_max:
            raise ValueError(f"model size {inc.sum()} exceeds p_max={self.p_max}")
        object.__setattr__(self, "included", inc)

    @property
    def size(self) -> int:
        return int(self.included.sum())

    def log_prior(self) -> float:
        # uniform over all models of size <= p_max
        return 0.0


def _project_out(A: np.ndarray, base: np.ndarray | None) -> np.ndarray:
    if base is None or base.shape[1] == 0:
        return A
    Q, _ = np.linalg.qr(base)
    return A - Q @ (Q.T @ A)


def _gprior_stats(y, X_M, base):
    """Centered, base-residualized R^2 of y on X_M, plus effective sample size.

    The intercept and every ``base`` column carry flat priors and each costs
    one degree of freedom.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    X_M = np.asarray(X_M, dtype=float).reshape(n, -1)
    k = X_M.shape[1]
    if base is not None:
        base = np.asarray(base, dtype=float).reshape(n, -1)
        base = base - base.mean(axis=0)
    n_base = 0 if base is None else base.shape[1]
    n_eff = n - 1 - n_base
    if k >= n_eff:
        raise ValueError(f"model size {k} too large for n={n} (need |M| < {n_eff})")
    yc = _project_out((y - y.mean())[:, None], base)[:, 0]
    syy = float(yc @ yc)
    if k == 0:
        return 0.0, 0, n_eff, syy
    Xc = _project_out(X_M - X_M.mean(axis=0), base)
    Q, R = np.linalg.qr(Xc)
    d = np.abs(np.diag(R))
    if d.size == 0 or d.min() <= 1e-10 * max(d.max(), 1.0):
        raise ValueError("rank-deficient X_M")
    fitted = Q.T @ yc
    r2 = float(fitted @ fitted) / syy if syy > 0 else 0.0
    return min(r2, 1.0), k, n_eff, syy


def log_marginal_gprior(y, X_M, g: float, base=None) -> float:
    """Log marginal likelihood of model M under Zellner's g-prior.

    Flat priors on the intercept (and on ``base`` columns, if given) and
    p(sigma) ∝ 1/sigma. Returned relative to the null model, so the empty
    model scores 0:

        (N - k)/2 log(1 + g) - N/2 log(1 + g (1 - R^2)),   N = n - 1 - n_base.
    """
    if g < 0:
        raise ValueError("g must be nonnegative")
    r2, k, n_eff, _ = _gprior_stats(y, X_M, base)
    return float(0.5 * (n_eff - k) * np.log1p(g) - 0.5 * n_eff * np.log1p(g * (1.0 - r2)))


def local_eb_g(y, X_M, base=None) -> float:
    """Within-model maximizer of the g-prior marginal: max(F - 1, 0), capped at 1e8."""
    r2, k, n_eff, _ = _gprior_stats(y, X_M, base)
    if k == 0:
        return 0.0
    if r2 >= 1.0:
        return G_CAP
    F = (r2 / k) / ((1.0 - r2) / (n_eff - k))
    return float(min(max(F - 1.0, 0.0), G_CAP))
