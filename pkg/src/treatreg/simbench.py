"""Data-generating processes for the simulation studies and a replication
harness reporting bias, coverage, interval length and MSE per method."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from joblib import Parallel, delayed

from .data import RegressionData
from .estimators import FitSummary, fit_ols, fit_oracle_ols, summarize
from .samplers import MCMCConfig, SliceCollapse, fit_naive, fit_reparam
from .selection import fit_selection_gprior

log = logging.getLogger(__name__)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratedDataset:
    data: RegressionData
    alpha: float
    beta_c: np.ndarray
    beta_d: np.ndarray
    support: tuple[int, ...]

    @property
    def beta(self) -> np.ndarray:
        """Response-equation control coefficients, beta_d - alpha * beta_c."""
        return self.beta_d - self.alpha * self.beta_c


def _dataset(y, z, X, alpha, beta, beta_c) -> GeneratedDataset:
    beta_d = beta + alpha * beta_c
    support = tuple(int(j) for j in np.flatnonzero(np.abs(beta) > 1e-14))
    return GeneratedDataset(RegressionData(y, z, X), alpha, beta_c, beta_d, support)


# --- scenarios ---------------------------------------------------------------

@dataclass(frozen=True)
class Wang1Scenario:
    """(Z, X1, X2) trivariate normal with corr(Z, X1) = rho, plus independent
    standard-normal noise controls."""

    n: int = 1000
    rho: float = 0.7
    effect: float = 0.1
    n_extra: int = 49
    noise_var: float = 1.0
    name: str = "wang1"

    @property
    def p(self) -> int:
        return 2 + self.n_extra

    @property
    def alpha(self) -> float:
        return self.effect

    def generate(self, rng) -> GeneratedDataset:
        S = np.eye(3)
        S[0, 1] = S[1, 0] = self.rho
        L = np.linalg.cholesky(S)
        zx = rng.standard_normal((self.n, 3)) @ L.T
        X = np.column_stack([zx[:, 1:], rng.standard_normal((self.n, self.n_extra))])
        z = zx[:, 0]
        beta = np.zeros(self.p)
        beta[:2] = self.effect
        y = self.effect * z + X @ beta + math.sqrt(self.noise_var) * rng.standard_normal(self.n)
        beta_c = np.zeros(self.p)
        beta_c[0] = self.rho
        return _dataset(y, z, X, self.effect, beta, beta_c)


def _wang2_cov(rho: float) -> np.ndarray:
    k = np.arange(1, 9)
    S = rho ** (k[:, None] + k[None, :] - 2.0)
    np.fill_diagonal(S, 1.0)
    return S


@dataclass(frozen=True)
class Wang2Scenario:
    """(Z, X1..X7) jointly normal with Sigma_kl = rho^(k+l-2) off the diagonal;
    X8..X14 and further noise controls independent standard normal."""

    n: int = 1000
    rho: float = 0.7
    effect: float = 0.1
    n_extra: int = 43
    name: str = "wang2"

    @property
    def p(self) -> int:
        return 14 + self.n_extra

    @property
    def alpha(self) -> float:
        return self.effect

    def covariance(self) -> np.ndarray:
        S = _wang2_cov(self.rho)
        w = np.linalg.eigvalsh(S)
        if w.min() <= 0:
            raise ScenarioError(
                f"Sigma_kl = rho^(k+l-2) is not positive definite for rho={self.rho} "
                f"(smallest eigenvalue {w.min():.3g})")
        return S

    def generate(self, rng) -> GeneratedDataset:
        S = self.covariance()
        L = np.linalg.cholesky(S)
        zx = rng.standard_normal((self.n, 8)) @ L.T
        X = np.column_stack([zx[:, 1:], rng.standard_normal((self.n, 7 + self.n_extra))])
        z = zx[:, 0]
        beta = np.zeros(self.p)
        beta[:14] = self.effect
        y = self.effect * z + X @ beta + rng.standard_normal(self.n)
        beta_c = np.zeros(self.p)
        beta_c[:7] = np.linalg.solve(S[1:, 1:], S[1:, 0])
        return _dataset(y, z, X, self.effect, beta, beta_c)


@dataclass(frozen=True)
class VardecScenario:
    """Two-equation design with var(Z) = var(Y) = 1 split into confounding
    share rho2, quasi-experimental share kappa2 and direct-effect share phi2.

    The first k controls are confounders, the next k both confounders and
    direct effects, the following k direct effects only. ``k == p`` makes
    beta_c and beta_d fully dense.
    """

    n: int = 100
    p: int = 30
    k: int = 3
    kappa2: float = 0.05
    phi2: float = 0.7
    rho2: float = 0.5
    name: str = "vardec"

    def __post_init__(self):
        if not 0 <= self.rho2 < 1:
            raise ScenarioError("rho2 must lie in [0, 1)")
        if self.kappa2 < 0 or self.phi2 < 0:
            raise ScenarioError("kappa2 and phi2 must be nonnegative")
        if self.kappa2 + self.phi2 >= 1:
            raise ScenarioError("kappa2 + phi2 must be < 1 so that sigma_nu^2 > 0")
        if self.k < 1:
            raise ScenarioError("k must be >= 1")
        if 3 * self.k > self.p and self.k != self.p:
            raise ScenarioError(f"3k={3 * self.k} exceeds p={self.p} (use k == p for the dense design)")

    @property
    def dense(self) -> bool:
        return 3 * self.k > self.p

    @property
    def alpha(self) -> float:
        return math.sqrt(self.kappa2 / (1.0 - self.rho2))

    @property
    def sigma_eps2(self) -> float:
        return 1.0 - self.rho2

    @property
    def sigma_nu2(self) -> float:
        return 1.0 - self.kappa2 - self.phi2

    def coefficients(self, rng) -> tuple[np.ndarray, np.ndarray]:
        bc = np.zeros(self.p)
        bd = np.zeros(self.p)
        if self.dense:
            bc[:] = 1.0
            bd[:] = rng.standard_normal(self.p)
        else:
            bc[: 2 * self.k] = 1.0
            bd[self.k: 3 * self.k] = rng.standard_normal(2 * self.k)
        bc *= math.sqrt(self.rho2 / (bc @ bc))
        bd *= math.sqrt(self.phi2 / (bd @ bd)) if self.phi2 > 0 else 0.0
        return bc, bd

    def generate(self, rng) -> GeneratedDataset:
        bc, bd = self.coefficients(rng)
        X = rng.standard_normal((self.n, self.p))
        X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
        eps = math.sqrt(self.sigma_eps2) * rng.standard_normal(self.n)
        nu = math.sqrt(self.sigma_nu2) * rng.standard_normal(self.n)
        z = X @ bc + eps
        a = self.alpha
        y = a * eps + X @ bd + nu
        return _dataset(y, z, X, a, bd - a * bc, bc)


def gen_wang1(rng) -> GeneratedDataset:
    return Wang1Scenario().generate(rng)


def gen_wang2(rng) -> GeneratedDataset:
    return Wang2Scenario().generate(rng)


def gen_vardec(s: VardecScenario, rng) -> GeneratedDataset:
    return s.generate(rng)


def pgtn_scenario() -> Wang1Scenario:
    return Wang1Scenario(n=30, n_extra=33, noise_var=0.04, name="pgtn")


def gen_pgtn(rng) -> GeneratedDataset:
    return pgtn_scenario().generate(rng)


def one_confounder_scenario(n: int, alpha: float = 0.5, beta_c: float = 0.8, beta_d: float = 0.6,
                            sigma_nu: float = 1.0, rng=None):
    """Single-confounder two-equation draw with unit selection noise.

    Returns (y, z, x).
    """
    rng = np.random.default_rng(rng)
    x = rng.standard_normal(n)
    eps = rng.standard_normal(n)
    z = beta_c * x + eps
    y = alpha * eps + beta_d * x + sigma_nu * rng.standard_normal(n)
    return y, z, x


# --- methods -----------------------------------------------------------------

LABELS = {
    "new": "New Approach",
    "ols": "OLS",
    "naive": "Naive Regularization",
    "oracle": "Oracle OLS",
    "new-gprior": "New Approach",
    "naive-gprior": "Naive Regularization",
}


def _applicable(method: str, n: int, p: int, p_max: int) -> str | None:
    """Reason a method cannot run on an (n, p) design, or None."""
    if method in ("new", "naive", "ols") and n <= p + 1:
        return f"{method} needs n > p + 1 (n={n}, p={p})"
    if method.endswith("gprior") and p_max >= n - 2:
        return f"{method} needs p_max < n - 2 (p_max={p_max}, n={n})"
    return None


def fit_method(method: str, ds: GeneratedDataset, cfg: MCMCConfig, p_max: int = 3,
               level: float = 0.95) -> FitSummary:
    d = ds.data
    if method == "ols":
        fit = fit_ols(d.y, d.z, d.X)
    elif method == "oracle":
        fit = fit_oracle_ols(d.y, d.z, d.X, ds.support)
    elif method == "new":
        fit = fit_reparam(d, cfg)
    elif method == "naive":
        fit = fit_naive(d, cfg)
    elif method == "new-gprior":
        fit = fit_selection_gprior(d, cfg, p_max, reparametrized=True)
    elif method == "naive-gprior":
        fit = fit_selection_gprior(d, cfg, p_max, reparametrized=False)
    else:
        raise ValueError(f"unknown method {method!r}")
    return summarize(fit, level, method=method)


# --- study harness -----------------------------------------------------------

@dataclass(frozen=True)
class MethodMetrics:
    method: str
    bias: float
    coverage: float
    interval_length: float
    mse: float
    n_ok: int
    n_failed: int = 0

    @property
    def label(self) -> str:
        return LABELS.get(self.method, self.method)


@dataclass(frozen=True)
class StudyResult:
    scenario: dict
    replications: int
    rows: tuple[MethodMetrics, ...]
    # per-method arrays (estimate, lower, upper, truth), one entry per replication
    records: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __getitem__(self, method: str) -> MethodMetrics:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "replications": self.replications,
            "columns": ["Bias", "Coverage", "I.L.", "MSE"],
            "rows": [{"method": r.label, "key": r.method, "Bias": r.bias, "Coverage": r.coverage,
                      "I.L.": r.interval_length, "MSE": r.mse, "n_ok": r.n_ok, "n_failed": r.n_failed}
                     for r in self.rows],
        }

    def to_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "bias", "coverage", "interval_length", "mse", "n_ok", "n_failed"])
            for r in self.rows:
                w.writerow([r.label, repr(r.bias), repr(r.coverage), repr(r.interval_length),
                            repr(r.mse), r.n_ok, r.n_failed])

    def format_table(self) -> str:
        head = f"{'':<22}{'Bias':>10}{'Coverage':>10}{'I.L.':>10}{'MSE':>10}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.label:<22}{r.bias:>10.4f}{r.coverage:>10.3f}{r.interval_length:>10.4f}{r.mse:>10.4f}")
        return "\n".join(lines)


def _replicate(scenario, methods, seed, r, cfg, p_max, level):
    child = np.random.SeedSequence(seed, spawn_key=(r,))
    data_seq, *method_seqs = child.spawn(1 + len(methods))
    ds = scenario.generate(np.random.default_rng(data_seq))
    out = {}
    for m, ms in zip(methods, method_seqs):
        mcfg = MCMCConfig(cfg.burn_in, cfg.n_draws, cfg.thin, int(ms.generate_state(1)[0]),
                          cfg.v_step, cfg.alpha_refresh)
        try:
            s = fit_method(m, ds, mcfg, p_max, level)
            out[m] = (s.estimate, s.lower, s.upper, ds.alpha)
        except (SliceCollapse, np.linalg.LinAlgError, ValueError) as e:
            log.warning("replication %d, method %s failed: %s", r, m, e)
            out[m] = (np.nan, np.nan, np.nan, ds.alpha)
    return out


def aggregate(method: str, rec: np.ndarray) -> MethodMetrics:
    """Metrics from an (R, 4) array of (estimate, lower, upper, truth)."""
    ok = np.all(np.isfinite(rec), axis=1)
    est, lo, hi, truth = rec[ok].T
    if est.size == 0:
        return MethodMetrics(method, np.nan, np.nan, np.nan, np.nan, 0, int((~ok).sum()))
    err = est - truth
    return MethodMetrics(method, float(err.mean()), float(np.mean((lo <= truth) & (truth <= hi))),
                         float(np.mean(hi - lo)), float(np.mean(err**2)), int(ok.sum()), int((~ok).sum()))


def scenario_echo(scenario) -> dict:
    d = asdict(scenario)
    d["p"] = scenario.p
    d["alpha"] = scenario.alpha
    return d


def run_study(scenario, methods: Sequence[str], reps: int, seed: int = 0, n_jobs: int = 1,
              cfg: MCMCConfig | None = None, p_max: int = 3, level: float = 0.95,
              progress: Callable[[int], None] | None = None) -> StudyResult:
    """Replicate ``scenario`` ``reps`` times and fit every method to each draw.

    Each replication derives its own random streams from (seed, index), so
    results do not depend on ``n_jobs``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    cfg = cfg or MCMCConfig()
    n, p = scenario.n, scenario.p
    usable = []
    for m in methods:
        if m not in LABELS:
            raise ValueError(f"unknown method {m!r}")
        why = _applicable(m, n, p, p_max)
        if why:
            log.warning("skipping %s", why)
        else:
            usable.append(m)
    if not usable:
        raise ScenarioError("no requested method is applicable to this scenario")

    jobs = (delayed(_replicate)(scenario, usable, seed, r, cfg, p_max, level) for r in range(reps))
    if n_jobs == 1:
        results = []
        for r, job in enumerate(jobs):
            fn, args, kwargs = job
            results.append(fn(*args, **kwargs))
            if progress:
                progress(r + 1)
    else:
        results = Parallel(n_jobs=n_jobs)(jobs)

    records = {m: np.array([res[m] for res in results], dtype=float) for m in usable}
    rows = tuple(aggregate(m, records[m]) for m in usable)
    if all(r.n_ok == 0 for r in rows):
        raise ScenarioError("every fit failed")
    return StudyResult(scenario_echo(scenario), reps, rows, records)
