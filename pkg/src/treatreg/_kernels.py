"""Compiled Gibbs loops for the shrinkage-prior samplers.

Everything here also runs un-jitted through ``.py_func`` and consumes the
``numpy.random.Generator`` stream in the same order, so compiled and
interpreted chains are bit-identical for a given seed.
"""

import numpy as np
from numba import njit

LOG4 = np.log(4.0)
LOG_2_OVER_PI = np.log(2.0 / np.pi)
TWO_PI = 2.0 * np.pi
MAX_SHRINKS = 1000
MIN_BRACKET = 1e-12


class SliceCollapse(RuntimeError):
    pass


@njit(cache=True)
def log_log1p_exp(t):
    if t > 35.0:
        return np.log(t + np.log1p(np.exp(-t)))
    if t < -35.0:
        return t
    return np.log(np.log1p(np.exp(t)))


@njit(cache=True)
def log_shrink(beta, v):
    lv = np.log(v)
    s = 0.0
    for j in range(beta.shape[0]):
        b = abs(beta[j])
        if b < 1e-300:
            b = 1e-300
        s += log_log1p_exp(LOG4 + 2.0 * (lv - np.log(b)))
    return s - beta.shape[0] * lv


@njit(cache=True)
def log_scale_target(v, beta):
    # posterior of log v: shrinkage kernel + half-Cauchy + Jacobian
    return log_shrink(beta, v) + LOG_2_OVER_PI - np.log1p(v * v) + np.log(v)


@njit(cache=True)
def v_update(v, beta, step, rng):
    prop = v * np.exp(step * rng.standard_normal())
    log_u = np.log(rng.random())
    if not (prop > 0.0 and np.isfinite(prop)):
        return v, False
    if log_u < log_scale_target(prop, beta) - log_scale_target(v, beta):
        return prop, True
    return v, False


@njit(cache=True)
def sigma_sq_draw(ssr, n, rng):
    # sigma^2 ~ InvGamma(n/2, ssr/2) under p(sigma) ∝ 1/sigma
    return 0.5 * ssr / rng.gamma(0.5 * n, 1.0)


@njit(cache=True)
def alpha_draw(zt_zt, zt_yt, sig_nu, rng):
    return zt_yt / zt_zt + sig_nu / np.sqrt(zt_zt) * rng.standard_normal()


@njit(cache=True)
def theta_log_prior(theta, p, reparam, v1, v2, work):
    """Shrinkage log-prior of a flat-space vector; alpha is never penalized.

    Naive layout: (alpha, beta). Reparametrized layout: (alpha, beta, gamma)
    mapped to beta_c = gamma, beta_d = beta + alpha * gamma first.
    """
    if not reparam:
        return log_shrink(theta[1:], v1)
    a = theta[0]
    for j in range(p):
        work[j] = theta[1 + j] + a * theta[1 + p + j]
    return log_shrink(theta[1 + p:], v1) + log_shrink(work, v2)


@njit(cache=True)
def ess_step(theta_hat, delta, zeta, cur_lp, p, reparam, v1, v2, rng, prop, work):
    """One elliptical slice move of ``delta`` along the ellipse through ``zeta``.

    Updates ``delta`` in place; returns (new log prior, rejected proposals).
    """
    d = delta.shape[0]
    ell = cur_lp + np.log(rng.random())
    phi = rng.random() * TWO_PI
    lo = phi - TWO_PI
    hi = phi
    shrinks = 0
    while True:
        c = np.cos(phi)
        s = np.sin(phi)
        for i in range(d):
            prop[i] = theta_hat[i] + delta[i] * c + zeta[i] * s
        lp = theta_log_prior(prop, p, reparam, v1, v2, work)
        if lp >= ell:
            break
        shrinks += 1
        if phi < 0.0:
            lo = phi
        else:
            hi = phi
        if shrinks >= MAX_SHRINKS or hi - lo < MIN_BRACKET:
            raise SliceCollapse("slice collapse")
        phi = lo + (hi - lo) * rng.random()
    for i in range(d):
        delta[i] = delta[i] * c + zeta[i] * s
    return lp, shrinks


@njit(cache=True)
def naive_chain(y, W, theta_hat, Rinv, theta0, sig0, v0, n_burn, n_keep, thin, step, rng):
    n, d = W.shape
    p = d - 1
    delta = theta0 - theta_hat
    theta = theta0.copy()
    sig, v = sig0, v0
    e = np.empty(d)
    prop = np.empty(d)
    work = np.empty(p)
    out_alpha = np.empty(n_keep)
    out_beta = np.empty((n_keep, p))
    out_sig = np.empty(n_keep)
    out_v = np.empty(n_keep)
    lp = log_shrink(theta[1:], v)
    n_acc = 0
    n_shrink = 0
    k = 0
    for it in range(n_burn + n_keep * thin):
        for i in range(d):
            e[i] = rng.standard_normal()
        zeta = sig * np.dot(Rinv, e)
        lp, s = ess_step(theta_hat, delta, zeta, lp, p, False, v, v, rng, prop, work)
        n_shrink += s
        theta = theta_hat + delta
        resid = y - np.dot(W, theta)
        sig = np.sqrt(sigma_sq_draw(np.dot(resid, resid), n, rng))
        v, acc = v_update(v, theta[1:], step, rng)
        n_acc += acc
        lp = log_shrink(theta[1:], v)
        if it >= n_burn and (it - n_burn) % thin == 0:
            out_alpha[k] = theta[0]
            out_beta[k] = theta[1:]
            out_sig[k] = sig
            out_v[k] = v
            k += 1
    return out_alpha, out_beta, out_sig, out_v, n_acc, n_shrink


@njit(cache=True)
def reparam_chain(y, z, X, theta_hat, Rinv1, Rinv2, theta0, sig_eps0, sig_nu0, vc0, vd0,
                  n_burn, n_keep, thin, step, alpha_refresh, rng):
    n, p = X.shape
    d = 2 * p + 1
    delta = theta0 - theta_hat
    theta = theta0.copy()
    sig_eps, sig_nu, vc, vd = sig_eps0, sig_nu0, vc0, vd0
    e1 = np.empty(p + 1)
    e2 = np.empty(p)
    zeta = np.empty(d)
    prop = np.empty(d)
    work = np.empty(p)
    out_alpha = np.empty(n_keep)
    out_bc = np.empty((n_keep, p))
    out_bd = np.empty((n_keep, p))
    out_se = np.empty(n_keep)
    out_sn = np.empty(n_keep)
    out_vc = np.empty(n_keep)
    out_vd = np.empty(n_keep)
    lp = theta_log_prior(theta, p, True, vc, vd, work)
    acc_c = 0
    acc_d = 0
    n_shrink = 0
    k = 0
    for it in range(n_burn + n_keep * thin):
        for i in range(p + 1):
            e1[i] = rng.standard_normal()
        for i in range(p):
            e2[i] = rng.standard_normal()
        zeta[:p + 1] = sig_nu * np.dot(Rinv1, e1)
        zeta[p + 1:] = sig_eps * np.dot(Rinv2, e2)
        lp, s = ess_step(theta_hat, delta, zeta, lp, p, True, vc, vd, rng, prop, work)
        n_shrink += s
        theta = theta_hat + delta
        alpha = theta[0]
        gamma = theta[p + 1:].copy()
        beta_d = theta[1:p + 1] + alpha * gamma

        z_t = z - np.dot(X, gamma)
        y_t = y - np.dot(X, beta_d)
        if alpha_refresh:
            zz = np.dot(z_t, z_t)
            if zz < 1e-14:
                raise SliceCollapse("degenerate residualized treatment")
            alpha = alpha_draw(zz, np.dot(z_t, y_t), sig_nu, rng)
            theta[0] = alpha
            theta[1:p + 1] = beta_d - alpha * gamma
            delta = theta - theta_hat

        resid_nu = y_t - alpha * z_t
        sig_eps = np.sqrt(sigma_sq_draw(np.dot(z_t, z_t), n, rng))
        sig_nu = np.sqrt(sigma_sq_draw(np.dot(resid_nu, resid_nu), n, rng))

        vc, a = v_update(vc, gamma, step, rng)
        acc_c += a
        vd, a = v_update(vd, beta_d, step, rng)
        acc_d += a
        lp = log_shrink(gamma, vc) + log_shrink(beta_d, vd)

        if it >= n_burn and (it - n_burn) % thin == 0:
            out_alpha[k] = alpha
            out_bc[k] = gamma
            out_bd[k] = beta_d
            out_se[k] = sig_eps
            out_sn[k] = sig_nu
            out_vc[k] = vc
            out_vd[k] = vd
            k += 1
    return out_alpha, out_bc, out_bd, out_se, out_sn, out_vc, out_vd, acc_c, acc_d, n_shrink
