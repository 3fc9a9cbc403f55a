"""Elliptical slice sampling and Gibbs samplers for the naive and the
reparametrized (selection + response) shrinkage regressions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as K
from .data import RegressionData
from .priors import log_half_cauchy, log_shrinkage_density

SliceCollapse = K.SliceCollapse


class RankDeficientError(ValueError):
    """Design matrix does not have full column rank."""


class PreconditionError(ValueError):
    """Inputs violate a sampler precondition (e.g. too few observations)."""


@dataclass(frozen=True)
class MCMCConfig:
    burn_in: int = 2000
    n_draws: int = 10000
    thin: int = 1
    seed: int | None = None
    v_step: float = 0.5
    alpha_refresh: bool = True

    def __post_init__(self):
        if self.burn_in < 0 or self.n_draws < 1 or self.thin < 1:
            raise ValueError("burn_in must be >= 0, n_draws and thin >= 1")
        if not self.v_step >= 0:
            raise ValueError("v_step must be nonnegative")


@dataclass(frozen=True)
class PosteriorDraws:
    """Retained chains keyed by parameter name.

    Scale parameters (``sigma_*``) are standard deviations. ``stats`` holds
    Metropolis acceptance rates for the global scales and slice counters.
    """

    method: str
    chains: dict[str, np.ndarray]
    config: MCMCConfig
    stats: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.chains.values()}
        if len(lengths) != 1:
            raise ValueError("chains have unequal lengths")
        for name, arr in self.chains.items():
            if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite draws in chain {name!r}")
            arr.setflags(write=False)

    @property
    def alpha(self) -> np.ndarray:
        return self.chains["alpha"]

    def __len__(self) -> int:
        return len(self.alpha)

    def mean(self, name: str) -> np.ndarray:
        return self.chains[name].mean(axis=0)


# --- building blocks ----------------------------------------------------------

def ess_update(delta, center, gaussian_scale, log_prior: Callable[[np.ndarray], float], rng,
               current_log_prior: float | None = None, info: dict | None = None) -> np.ndarray:
    """Elliptical slice update of an offset from the least-squares center.

    The ellipse passes through ``delta`` and ``zeta = gaussian_scale @ e`` with
    ``e`` standard normal, so ``gaussian_scale`` must be a factor L of the
    flat-prior posterior covariance (L L^T = sigma^2 (X^T X)^{-1}). The prior is
    evaluated at ``center + delta``. If ``info`` is given, ``info["rejected"]``
    accumulates the number of rejected proposals.
    """
    delta = np.asarray(delta, dtype=float)
    center = np.asarray(center, dtype=float)
    L = np.asarray(gaussian_scale, dtype=float)
    zeta = L @ rng.standard_normal(L.shape[1])
    cur = log_prior(center + delta) if current_log_prior is None else current_log_prior
    if not np.isfinite(cur):
        raise ValueError("log prior is not finite at the current point")
    ell = cur + math.log(rng.random())
    phi = rng.random() * K.TWO_PI
    lo, hi = phi - K.TWO_PI, phi
    rejected = 0
    while True:
        prop = delta * math.cos(phi) + zeta * math.sin(phi)
        if log_prior(center + prop) >= ell:
            break
        rejected += 1
        if phi < 0:
            lo = phi
        else:
            hi = phi
        if rejected >= K.MAX_SHRINKS or hi - lo < K.MIN_BRACKET:
            raise SliceCollapse("slice collapse")
        phi = lo + (hi - lo) * rng.random()
    if info is not None:
        info["rejected"] = info.get("rejected", 0) + rejected
    return prop


def sample_sigma_sq(residuals, rng) -> float:
    """Draw sigma^2 from InvGamma(n/2, SSR/2), the conditional under p(sigma) ∝ 1/sigma."""
    r = np.asarray(residuals, dtype=float).ravel()
    if r.size < 2:
        raise ValueError("need at least two residuals")
    ssr = float(r @ r)
    if ssr <= 0:
        raise ValueError("sum of squared residuals is zero")
    return float(K.sigma_sq_draw(ssr, r.size, rng))


def update_global_scale(v: float, beta, step: float, rng) -> tuple[float, bool]:
    """Random-walk Metropolis on log v under the shrinkage kernel and a C+(0,1) prior."""
    if not v > 0:
        raise ValueError("v must be positive")
    if step < 0:
        raise ValueError("step must be nonnegative")
    v_new, acc = K.v_update(float(v), np.ascontiguousarray(beta, dtype=float), float(step), rng)
    return float(v_new), bool(acc)


def log_scale_posterior(v: float, beta) -> float:
    """Unnormalized log density of v given beta (on the v scale, no Jacobian)."""
    return log_shrinkage_density(beta, v) + log_half_cauchy(v)


def sample_alpha_conditional(y, z, X, beta_c, beta_d, sigma_nu: float, rng) -> float:
    """Draw alpha | beta_c, beta_d, sigma_nu under a flat prior.

    Simple regression of y - X beta_d on z - X beta_c.
    """
    X = np.asarray(X, dtype=float)
    z_t = np.asarray(z, dtype=float) - X @ np.asarray(beta_c, dtype=float)
    y_t = np.asarray(y, dtype=float) - X @ np.asarray(beta_d, dtype=float)
    zz = float(z_t @ z_t)
    if zz < 1e-14:
        raise ValueError("residualized treatment is identically zero")
    return float(K.alpha_draw(zz, float(z_t @ y_t), float(sigma_nu), rng))


# --- full samplers ------------------------------------------------------------

def least_squares(W: np.ndarray, y: np.ndarray, what: str = "design") -> tuple[np.ndarray, np.ndarray]:
    """QR least squares. Returns (coefficients, R^{-1}) with R^{-1} R^{-T} = (W^T W)^{-1}."""
    n, d = W.shape
    if d == 0:
        return np.zeros(0), np.zeros((0, 0))
    Q, R = np.linalg.qr(W)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-10 * diag.max():
        raise RankDeficientError(f"rank-deficient {what}")
    coef = np.linalg.solve(R, Q.T @ y)
    Rinv = np.linalg.solve(R, np.eye(d))
    return coef, np.triu(Rinv)


def _check_dims(data: RegressionData):
    if data.n <= data.p + 1:
        raise PreconditionError(f"need n > p + 1 (n={data.n}, p={data.p})")
    if data.p == 0:
        raise PreconditionError("shrinkage samplers need at least one control")


def _rng(cfg: MCMCConfig):
    return np.random.default_rng(cfg.seed)


def fit_naive(data: RegressionData, cfg: MCMCConfig = MCMCConfig(), *, compiled: bool = True) -> PosteriorDraws:
    """Response-equation-only model with the shrinkage prior on the controls."""
    _check_dims(data)
    y, z, X = data.y, data.z, data.X
    W = np.column_stack([z, X])
    theta_hat, Rinv = least_squares(W, y, "design [z X]")
    resid = y - W @ theta_hat
    sig0 = math.sqrt(float(resid @ resid) / (data.n - data.p - 1))
    if sig0 <= 0:
        raise PreconditionError("perfect fit: residual variance is zero")
    chain = K.naive_chain if compiled else K.naive_chain.py_func
    a, b, s, v, acc, shrinks = chain(
        np.ascontiguousarray(y), np.ascontiguousarray(W), theta_hat, Rinv, theta_hat.copy(),
        sig0, 1.0, cfg.burn_in, cfg.n_draws, cfg.thin, float(cfg.v_step), _rng(cfg))
    total = cfg.burn_in + cfg.n_draws * cfg.thin
    return PosteriorDraws(
        "naive", {"alpha": a, "beta": b, "sigma_nu": s, "v": v}, cfg,
        {"v_accept": acc / total, "slice_rejections": float(shrinks)})


def fit_reparam(data: RegressionData, cfg: MCMCConfig = MCMCConfig(), *, compiled: bool = True) -> PosteriorDraws:
    """Two-equation model with independent shrinkage priors on beta_c and beta_d.

    Samples (alpha, beta, gamma) with the elliptical slice sampler around the
    two least-squares fits, evaluating the prior at beta_c = gamma and
    beta_d = beta + alpha * gamma; chains are reported as (alpha, beta_c, beta_d).
    """
    _check_dims(data)
    y, z, X = data.y, data.z, data.X
    W = np.column_stack([z, X])
    resp_hat, Rinv1 = least_squares(W, y, "design [z X]")
    gamma_hat, Rinv2 = least_squares(X, z, "control matrix X")
    theta_hat = np.concatenate([resp_hat, gamma_hat])
    r_nu = y - W @ resp_hat
    r_eps = z - X @ gamma_hat
    dof = data.n - data.p - 1
    sig_nu0 = math.sqrt(float(r_nu @ r_nu) / dof)
    sig_eps0 = math.sqrt(float(r_eps @ r_eps) / (data.n - data.p))
    if sig_nu0 <= 0 or sig_eps0 <= 0:
        raise PreconditionError("perfect fit: residual variance is zero")
    chain = K.reparam_chain if compiled else K.reparam_chain.py_func
    out = chain(
        np.ascontiguousarray(y), np.ascontiguousarray(z), np.ascontiguousarray(X), theta_hat,
        Rinv1, Rinv2, theta_hat.copy(), sig_eps0, sig_nu0, 1.0, 1.0,
        cfg.burn_in, cfg.n_draws, cfg.thin, float(cfg.v_step), bool(cfg.alpha_refresh), _rng(cfg))
    a, bc, bd, se, sn, vc, vd, acc_c, acc_d, shrinks = out
    total = cfg.burn_in + cfg.n_draws * cfg.thin
    return PosteriorDraws(
        "new",
        {"alpha": a, "beta_c": bc, "beta_d": bd, "sigma_eps": se, "sigma_nu": sn, "v_c": vc, "v_d": vd},
        cfg,
        {"v_c_accept": acc_c / total, "v_d_accept": acc_d / total, "slice_rejections": float(shrinks)})


def two_equation_loglik(y, z, X, alpha, beta_c, beta_d, sigma_eps, sigma_nu) -> float:
    """Joint Gaussian log-likelihood of the selection and response equations."""
    X = np.asarray(X, dtype=float)
    r_eps = z - X @ beta_c
    r_nu = y - alpha * r_eps - X @ beta_d
    n = len(y)
    return float(
        -n * (math.log(sigma_eps) + math.log(sigma_nu) + math.log(2 * math.pi))
        - 0.5 * (r_eps @ r_eps) / sigma_eps**2 - 0.5 * (r_nu @ r_nu) / sigma_nu**2)


def two_equation_loglik_flat(y, z, X, alpha, beta, gamma, sigma_eps, sigma_nu) -> float:
    """Same likelihood in the original (alpha, beta, gamma) coordinates."""
    X = np.asarray(X, dtype=float)
    r_eps = z - X @ gamma
    r_nu = y - alpha * z - X @ beta
    n = len(y)
    return float(
        -n * (math.log(sigma_eps) + math.log(sigma_nu) + math.log(2 * math.pi))
        - 0.5 * (r_eps @ r_eps) / sigma_eps**2 - 0.5 * (r_nu @ r_nu) / sigma_nu**2)
