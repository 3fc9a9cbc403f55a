"""OLS baselines, interval summaries and scikit-learn style estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import RegressionData, StandardizationInfo, standardize
from .samplers import (MCMCConfig, PosteriorDraws, PreconditionError, RankDeficientError,
                       fit_naive, fit_reparam)
from .selection import fit_selection_gprior


@dataclass(frozen=True)
class OlsFit:
    """Least-squares fit of y on [z X]; ``coef[0]`` is the treatment effect."""

    coef: np.ndarray
    residuals: np.ndarray
    se: np.ndarray
    df: int
    method: str = "ols"

    @property
    def alpha(self) -> float:
        return float(self.coef[0])

    @property
    def alpha_se(self) -> float:
        return float(self.se[0])


@dataclass(frozen=True)
class FitSummary:
    method: str
    estimate: float
    lower: float
    upper: float
    level: float = 0.95

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError("interval lower bound exceeds upper bound")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        lo, hi = _pct((1 - self.level) / 2), _pct((1 + self.level) / 2)
        return {"method": self.method, "estimate": self.estimate, lo: self.lower, hi: self.upper,
                "level": self.level}


def _pct(q: float) -> str:
    return f"{100 * q:g}%"


def fit_ols(y, z, X) -> OlsFit:
    y = np.asarray(y, dtype=float).ravel()
    W = np.column_stack([np.asarray(z, dtype=float).ravel(), np.asarray(X, dtype=float).reshape(len(y), -1)])
    n, d = W.shape
    if n <= d:
        raise PreconditionError(f"need n > p + 1 (n={n}, p={d - 1})")
    Q, R = np.linalg.qr(W)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-10 * diag.max():
        raise RankDeficientError("rank-deficient design [z X]")
    coef = np.linalg.solve(R, Q.T @ y)
    resid = y - W @ coef
    df = n - d
    s2 = float(resid @ resid) / df
    Rinv = np.linalg.solve(R, np.eye(d))
    se = np.sqrt(s2 * np.sum(Rinv**2, axis=1))
    return OlsFit(coef, resid, se, df)


def fit_oracle_ols(y, z, X, true_support) -> OlsFit:
    """OLS on z plus only the columns in ``true_support``."""
    X = np.asarray(X, dtype=float)
    idx = np.asarray(sorted(true_support), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= X.shape[1]):
        raise ValueError("support index out of range")
    fit = fit_ols(y, z, X[:, idx])
    return OlsFit(fit.coef, fit.residuals, fit.se, fit.df, method="oracle")


def summarize(fit: PosteriorDraws | OlsFit, level: float = 0.95, method: str | None = None) -> FitSummary:
    """Point estimate and interval for alpha.

    Posterior draws give the posterior mean and an equal-tailed quantile
    interval; OLS gives the estimate with a t interval.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if isinstance(fit, OlsFit):
        half = stats.t.ppf(0.5 + level / 2, fit.df) * fit.alpha_se
        return FitSummary(method or fit.method, fit.alpha, fit.alpha - half, fit.alpha + half, level)
    a = np.asarray(fit.alpha)
    if a.size == 0:
        raise ValueError("empty chain")
    lo, hi = np.quantile(a, [(1 - level) / 2, (1 + level) / 2])
    return FitSummary(method or fit.method, float(a.mean()), float(lo), float(hi), level)


# --- scikit-learn wrappers ----------------------------------------------------

class _TreatmentRegressor(RegressorMixin, BaseEstimator):
    """Shared plumbing: column ``treatment`` of X is the treatment, the rest
    are controls. After ``fit``: ``effect_``, ``interval_``, ``coef_``,
    ``summary_``."""

    def _split(self, X):
        j = self.treatment
        if not -X.shape[1] <= j < X.shape[1]:
            raise ValueError(f"treatment index {j} out of range for {X.shape[1]} columns")
        j %= X.shape[1]
        return X[:, j], np.delete(X, j, axis=1)

    def _prepare(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        z, C = self._split(X)
        data = RegressionData(y, z, C)
        self.n_features_in_ = X.shape[1]
        if getattr(self, "standardize", False):
            data, info = standardize(data)
        else:
            info = None
        self.standardization_ = info
        return data

    def _finish(self, summary: FitSummary, controls: np.ndarray, data: RegressionData):
        self.summary_ = summary
        self.effect_ = summary.estimate
        self.interval_ = (summary.lower, summary.upper)
        info: StandardizationInfo | None = self.standardization_
        self.coef_ = info.coef_to_original(controls) if info is not None else np.asarray(controls)
        self.intercept_ = info.intercept(self.effect_, self.coef_) if info is not None else 0.0
        return self

    def predict(self, X):
        check_is_fitted(self, "effect_")
        X = check_array(X)
        z, C = self._split(X)
        return self.intercept_ + self.effect_ * z + C @ self.coef_


class OLSTreatmentRegression(_TreatmentRegressor):
    """Least squares on the treatment and all (or ``support``) controls."""

    def __init__(self, treatment: int = 0, support=None, level: float = 0.95, standardize: bool = False):
        self.treatment = treatment
        self.support = support
        self.level = level
        self.standardize = standardize

    def fit(self, X, y):
        data = self._prepare(X, y)
        if self.support is None:
            fit = fit_ols(data.y, data.z, data.X)
            controls = fit.coef[1:]
        else:
            fit = fit_oracle_ols(data.y, data.z, data.X, self.support)
            controls = np.zeros(data.p)
            controls[sorted(self.support)] = fit.coef[1:]
        self.ols_ = fit
        return self._finish(summarize(fit, self.level), controls, data)


class _BayesMixin:
    def _config(self) -> MCMCConfig:
        seed = self.random_state
        if isinstance(seed, np.random.Generator):
            seed = int(seed.integers(2**63))
        return MCMCConfig(self.burn_in, self.n_draws, self.thin, seed, getattr(self, "v_step", 0.5))


class NaiveShrinkageRegression(_BayesMixin, _TreatmentRegressor):
    """Shrinkage prior on the controls of the response equation only."""

    def __init__(self, treatment: int = 0, burn_in: int = 2000, n_draws: int = 10000, thin: int = 1,
                 v_step: float = 0.5, random_state=None, level: float = 0.95, standardize: bool = False):
        self.treatment = treatment
        self.burn_in = burn_in
        self.n_draws = n_draws
        self.thin = thin
        self.v_step = v_step
        self.random_state = random_state
        self.level = level
        self.standardize = standardize

    def fit(self, X, y):
        data = self._prepare(X, y)
        self.draws_ = fit_naive(data, self._config())
        return self._finish(summarize(self.draws_, self.level), self.draws_.mean("beta"), data)


class ReparamShrinkageRegression(_BayesMixin, _TreatmentRegressor):
    """Selection + response equations with independent shrinkage priors on the
    confounding (``beta_c``) and direct (``beta_d``) coefficients.

    ``coef_`` holds the implied response-equation control coefficients
    ``beta_d - alpha * beta_c`` averaged over draws.
    """

    def __init__(self, treatment: int = 0, burn_in: int = 2000, n_draws: int = 10000, thin: int = 1,
                 v_step: float = 0.5, random_state=None, level: float = 0.95, standardize: bool = False):
        self.treatment = treatment
        self.burn_in = burn_in
        self.n_draws = n_draws
        self.thin = thin
        self.v_step = v_step
        self.random_state = random_state
        self.level = level
        self.standardize = standardize

    def fit(self, X, y):
        data = self._prepare(X, y)
        d = self.draws_ = fit_reparam(data, self._config())
        beta = (d.chains["beta_d"] - d.alpha[:, None] * d.chains["beta_c"]).mean(axis=0)
        self.beta_c_ = d.mean("beta_c")
        self.beta_d_ = d.mean("beta_d")
        return self._finish(summarize(d, self.level), beta, data)


class GPriorSelectionRegression(_BayesMixin, _TreatmentRegressor):
    """Point-mass g-prior variable selection, usable when p > n.

    ``coef_`` is zero: the sampler integrates the control coefficients out.
    ``inclusion_`` gives posterior inclusion probabilities of the response
    equation controls.
    """

    def __init__(self, treatment: int = 0, p_max: int = 3, reparametrized: bool = True,
                 burn_in: int = 2000, n_draws: int = 10000, thin: int = 1,
                 random_state=None, level: float = 0.95, standardize: bool = False):
        self.treatment = treatment
        self.p_max = p_max
        self.reparametrized = reparametrized
        self.burn_in = burn_in
        self.n_draws = n_draws
        self.thin = thin
        self.random_state = random_state
        self.level = level
        self.standardize = standardize

    def fit(self, X, y):
        data = self._prepare(X, y)
        d = self.draws_ = fit_selection_gprior(data, self._config(), self.p_max, self.reparametrized)
        self.inclusion_ = d.chains["include_d"].mean(axis=0)
        return self._finish(summarize(d, self.level), np.zeros(data.p), data)
