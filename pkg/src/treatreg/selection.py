"""Point-mass g-prior model search for p > n.

Both the selection equation (z on X_{M_c}) and the response equation
(y on the residualized treatment z - X beta_c plus X_{M_d}) carry Zellner
g-priors with g set per model by local empirical Bayes. Models are explored
with add / delete / swap Metropolis-Hastings moves under a uniform prior on
models with at most ``p_max`` included columns.
"""

from __future__ import annotations

import math

import numpy as np

from .data import RegressionData
from .priors import G_CAP
from .samplers import MCMCConfig, PosteriorDraws, PreconditionError


class _Fit:
    """Sufficient quantities of a centered g-prior regression of ``yc`` on ``Xc``
    after projecting out an optional flat-prior base column."""

    __slots__ = ("k", "n_eff", "r2", "g", "score", "syy", "coef", "Rinv")

    def __init__(self, yc, Xc, n_eff):
        self.k = Xc.shape[1]
        self.n_eff = n_eff
        self.syy = float(yc @ yc)
        if self.k == 0:
            self.r2, self.g, self.score = 0.0, 0.0, 0.0
            self.coef = np.zeros(0)
            self.Rinv = np.zeros((0, 0))
            return
        Q, R = np.linalg.qr(Xc)
        d = np.abs(np.diag(R))
        if d.min() <= 1e-10 * max(d.max(), 1.0):
            raise np.linalg.LinAlgError("rank-deficient model")
        qy = Q.T @ yc
        self.r2 = min(float(qy @ qy) / self.syy, 1.0) if self.syy > 0 else 0.0
        if self.r2 >= 1.0:
            self.g = G_CAP
        else:
            F = (self.r2 / self.k) / ((1.0 - self.r2) / (n_eff - self.k))
            self.g = min(max(F - 1.0, 0.0), G_CAP)
        self.score = 0.5 * (n_eff - self.k) * math.log1p(self.g) - 0.5 * n_eff * math.log1p(self.g * (1.0 - self.r2))
        self.Rinv = np.linalg.solve(R, np.eye(self.k))
        self.coef = self.Rinv @ qy

    def draw(self, rng):
        """Joint posterior draw of (sigma^2, coefficients)."""
        shrink = self.g / (1.0 + self.g)
        s = self.syy * (1.0 + self.g * (1.0 - self.r2)) / (1.0 + self.g)
        sig2 = 0.5 * s / rng.gamma(0.5 * self.n_eff, 1.0)
        if self.k == 0:
            return sig2, np.zeros(0)
        e = rng.standard_normal(self.k)
        return sig2, shrink * self.coef + math.sqrt(shrink * sig2) * (self.Rinv @ e)


class _Problem:
    def __init__(self, data: RegressionData):
        self.n, self.p = data.n, data.p
        self.X = data.X
        self.Xc = data.X - data.X.mean(axis=0)
        self.y = data.y
        self.yc = data.y - data.y.mean()
        self.zc = data.z - data.z.mean()

    def selection(self, idx) -> _Fit:
        return _Fit(self.zc, self.Xc[:, idx], self.n - 1)

    def response(self, zt, idx) -> _Fit:
        """Fit of y on the columns idx after projecting out the centered
        treatment ``zt`` (flat prior on its coefficient)."""
        zz = float(zt @ zt)
        if zz < 1e-14:
            raise np.linalg.LinAlgError("degenerate residualized treatment")
        u = zt / math.sqrt(zz)
        yr = self.yc - u * (u @ self.yc)
        Xd = self.Xc[:, idx]
        Xr = Xd - np.outer(u, u @ Xd)
        return _Fit(yr, Xr, self.n - 2)

    def alpha(self, zt, idx, fit: _Fit, rng) -> tuple[float, float]:
        """Draw alpha from its within-model conditional.

        Write alpha zt + X_d b = zt (alpha + c b) + (I - P_zt) X_d b; the
        shifted coefficient has a flat prior so it separates from b.
        """
        sig2, b = fit.draw(rng)
        zz = float(zt @ zt)
        a = float(zt @ self.yc) / zz + math.sqrt(sig2 / zz) * rng.standard_normal()
        if fit.k:
            c = (zt @ self.Xc[:, idx]) / zz
            a -= float(c @ b)
        return a, sig2


def _propose(inc: np.ndarray, p_max: int, rng):
    """Add / delete / swap proposal. Returns (new inclusion, log Hastings ratio)
    or None when the move is impossible or exceeds ``p_max``."""
    p = inc.size
    k = int(inc.sum())
    move = int(rng.integers(3))
    on = np.flatnonzero(inc)
    off = np.flatnonzero(~inc)
    new = inc.copy()
    if move == 0:
        if k >= p_max or k == p:
            return None
        new[off[rng.integers(off.size)]] = True
        return new, math.log((p - k) / (k + 1))
    if move == 1:
        if k == 0:
            return None
        new[on[rng.integers(on.size)]] = False
        return new, math.log(k / (p - k + 1))
    if k == 0 or k == p:
        return None
    new[on[rng.integers(on.size)]] = False
    new[off[rng.integers(off.size)]] = True
    return new, 0.0


def fit_selection_gprior(data: RegressionData, cfg: MCMCConfig = MCMCConfig(), p_max: int = 3,
                         reparametrized: bool = True) -> PosteriorDraws:
    """Model-space MCMC under point-mass g-priors; works for p > n.

    With ``reparametrized=False`` only the response equation is used and the
    treatment enters unresidualized (the naive variant).
    """
    n, p = data.n, data.p
    if p_max < 0:
        raise PreconditionError("p_max must be nonnegative")
    if p_max >= n - 2:
        raise PreconditionError(f"p_max={p_max} must be < n - 2 = {n - 2}")
    rng = np.random.default_rng(cfg.seed)
    prob = _Problem(data)

    inc_c = np.zeros(p, dtype=bool)
    inc_d = np.zeros(p, dtype=bool)
    beta_c = np.zeros(0)
    zt = prob.zc.copy()
    sel = prob.selection(inc_c)
    resp = prob.response(zt, inc_d)

    def residualize(fit_c, idx, rng):
        _, b = fit_c.draw(rng)
        z_new = prob.zc - prob.Xc[:, idx] @ b if b.size else prob.zc.copy()
        return b, z_new

    total = cfg.burn_in + cfg.n_draws * cfg.thin
    out_alpha = np.empty(cfg.n_draws)
    out_sig = np.empty(cfg.n_draws)
    out_c = np.zeros((cfg.n_draws, p), dtype=bool)
    out_d = np.zeros((cfg.n_draws, p), dtype=bool)
    acc = {"c": 0, "d": 0, "refresh": 0}
    tries = {"c": 0, "d": 0}
    k = 0
    for it in range(total):
        if reparametrized:
            prop = _propose(inc_c, p_max, rng)
            if prop is not None:
                tries["c"] += 1
                new_c, log_h = prop
                try:
                    sel_new = prob.selection(np.flatnonzero(new_c))
                    b_new, zt_new = residualize(sel_new, np.flatnonzero(new_c), rng)
                    resp_new = prob.response(zt_new, np.flatnonzero(inc_d))
                except np.linalg.LinAlgError:
                    resp_new = None
                if resp_new is not None:
                    log_r = sel_new.score + resp_new.score - sel.score - resp.score + log_h
                    if math.log(rng.random()) < log_r:
                        inc_c, sel, beta_c, zt, resp = new_c, sel_new, b_new, zt_new, resp_new
                        acc["c"] += 1
            if inc_c.any():
                # refresh beta_c within the current model
                b_new, zt_new = residualize(sel, np.flatnonzero(inc_c), rng)
                try:
                    resp_new = prob.response(zt_new, np.flatnonzero(inc_d))
                except np.linalg.LinAlgError:
                    resp_new = None
                if resp_new is not None and math.log(rng.random()) < resp_new.score - resp.score:
                    beta_c, zt, resp = b_new, zt_new, resp_new
                    acc["refresh"] += 1

        prop = _propose(inc_d, p_max, rng)
        if prop is not None:
            tries["d"] += 1
            new_d, log_h = prop
            try:
                resp_new = prob.response(zt, np.flatnonzero(new_d))
            except np.linalg.LinAlgError:
                resp_new = None
            if resp_new is not None and math.log(rng.random()) < resp_new.score - resp.score + log_h:
                inc_d, resp = new_d, resp_new
                acc["d"] += 1

        alpha, sig2 = prob.alpha(zt, np.flatnonzero(inc_d), resp, rng)
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            out_alpha[k] = alpha
            out_sig[k] = math.sqrt(sig2)
            out_c[k] = inc_c
            out_d[k] = inc_d
            k += 1

    stats = {f"{key}_accept": acc[key] / max(tries[key], 1) for key in ("c", "d")}
    stats["refresh_accept"] = acc["refresh"] / total
    chains = {"alpha": out_alpha, "sigma_nu": out_sig, "include_d": out_d}
    if reparametrized:
        chains["include_c"] = out_c
    return PosteriorDraws("new-gprior" if reparametrized else "naive-gprior", chains, cfg, stats)
