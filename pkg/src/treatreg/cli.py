"""Command-line interface: ``simulate``, ``fit`` and ``diagnose``.

Exit codes: 0 success, 2 input error, 3 precondition failure,
4 internal numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys

import numpy as np

from . import diagnostics
from .data import DataError, DataTable, DesignSpec, RegressionData, load_table, prepare
from .estimators import fit_ols, summarize
from .samplers import (MCMCConfig, PreconditionError, RankDeficientError, SliceCollapse, fit_naive,
                       fit_reparam)
from .selection import fit_selection_gprior
from .simbench import (ScenarioError, VardecScenario, Wang1Scenario, Wang2Scenario, _applicable,
                       pgtn_scenario, run_study)

EXIT_OK, EXIT_INPUT, EXIT_PRECONDITION, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("treatreg")


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def _mcmc_args(p: argparse.ArgumentParser, draws: int = 10000, burn_in: int = 2000):
    p.add_argument("--draws", type=int, default=draws, help="retained posterior draws")
    p.add_argument("--burn-in", type=int, default=burn_in)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--v-step", type=float, default=0.5, help="random-walk step for log v")
    p.add_argument("--seed", type=int, default=0)


def _config(args) -> MCMCConfig:
    try:
        return MCMCConfig(args.burn_in, args.draws, args.thin, args.seed, args.v_step)
    except ValueError as e:
        raise CliError(str(e), EXIT_INPUT) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treatreg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a Monte Carlo study")
    s.add_argument("--scenario", required=True, choices=["wang1", "wang2", "vardec", "dense", "pgtn"])
    s.add_argument("--n", type=int)
    s.add_argument("--p", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--kappa2", type=float)
    s.add_argument("--phi2", type=float)
    s.add_argument("--rho2", type=float)
    s.add_argument("--pmax", type=int, default=3)
    s.add_argument("--reps", type=int, default=200)
    s.add_argument("--methods", help="comma-separated: new, ols, naive, oracle, new-gprior, naive-gprior")
    s.add_argument("--level", type=float, default=0.95)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out", help="output prefix for .csv and .json (default: scenario name)")
    _mcmc_args(s)

    f = sub.add_parser("fit", help="fit one model to a CSV file")
    _data_args(f)
    f.add_argument("--method", default="new", choices=["new", "naive", "ols", "new-gprior", "naive-gprior"])
    f.add_argument("--pmax", type=int, default=3)
    f.add_argument("--level", type=float, default=0.95)
    f.add_argument("--out", help="write the summary JSON here")
    f.add_argument("--chains", help="write retained draws to this CSV")
    _mcmc_args(f)

    d = sub.add_parser("diagnose", help="closed-form bias and exogeneity diagnostics")
    _data_args(d)
    d.add_argument("--coef", required=True,
                   help="JSON with any of: alpha, beta, beta_c, beta_d (control coefficients)")
    return parser


def _data_args(p: argparse.ArgumentParser):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--design", help="JSON design spec; without it all other numeric columns are controls")
    p.add_argument("--response", default="y")
    p.add_argument("--treatment", default="z")
    p.add_argument("--standardize", action="store_true",
                   help="center y and z and scale the controls (implied by a design spec that asks for it)")


# --- simulate ----------------------------------------------------------------

def _scenario(args):
    if args.scenario in ("vardec", "dense"):
        missing = [f"--{k}" for k in ("kappa2", "phi2", "rho2") if getattr(args, k) is None]
        if missing:
            raise CliError(f"scenario {args.scenario} requires {', '.join(missing)}", EXIT_INPUT)
        k_default = 3 if args.scenario == "vardec" else 10
        try:
            return VardecScenario(args.n or 100, args.p or 30, args.k or k_default,
                                  args.kappa2, args.phi2, args.rho2, name=args.scenario)
        except ScenarioError as e:
            raise CliError(str(e), EXIT_INPUT) from None
    if args.scenario == "wang1":
        return Wang1Scenario()
    if args.scenario == "wang2":
        return Wang2Scenario()
    return pgtn_scenario()


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    if args.reps < 1:
        raise CliError("--reps must be >= 1", EXIT_INPUT)
    if args.methods:
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    elif args.scenario == "pgtn":
        methods = ["new-gprior", "naive-gprior"]
    else:
        methods = ["new", "ols", "naive", "oracle"]
    for m in methods:
        if m not in ("new", "ols", "naive", "oracle", "new-gprior", "naive-gprior"):
            raise CliError(f"unknown method {m!r}", EXIT_INPUT)
        why = _applicable(m, sc.n, sc.p, args.pmax)
        if why:
            raise CliError(why, EXIT_PRECONDITION)
    res = run_study(sc, methods, args.reps, args.seed, args.threads, _config(args), args.pmax, args.level)
    prefix = args.out or args.scenario
    res.to_csv(f"{prefix}.csv")
    res.to_json(f"{prefix}.json")
    print(f"scenario={sc.name} n={sc.n} p={sc.p} reps={args.reps} seed={args.seed}")
    print(res.format_table())
    return EXIT_OK


# --- fit / diagnose ----------------------------------------------------------

def _load(args) -> tuple[RegressionData, object]:
    table = load_table(args.data)
    if args.design:
        try:
            spec = DesignSpec.from_json(args.design)
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"cannot read design spec: {e}", EXIT_INPUT) from None
    else:
        controls = [c for c in table.names
                    if c not in (args.response, args.treatment) and table.is_numeric(c)]
        spec = DesignSpec(args.response, args.treatment, tuple(controls))
    if args.standardize and not spec.standardize:
        spec = dataclasses.replace(spec, standardize=True)
    return prepare(table, spec)


def _write_chains(path: str, draws) -> None:
    cols, names = [], []
    for key, arr in draws.chains.items():
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 1:
            cols.append(arr[:, None])
            names.append(key)
        else:
            cols.append(arr)
            names.extend(f"{key}[{j}]" for j in range(arr.shape[1]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        w.writerows(np.hstack(cols).tolist())


def cmd_fit(args) -> int:
    data, _ = _load(args)
    print(f"n={data.n} p={data.p} method={args.method}")
    cfg = _config(args)
    if args.method == "ols":
        fit = fit_ols(data.y, data.z, data.X)
    elif args.method == "new":
        fit = fit_reparam(data, cfg)
    elif args.method == "naive":
        fit = fit_naive(data, cfg)
    else:
        fit = fit_selection_gprior(data, cfg, args.pmax, reparametrized=args.method == "new-gprior")
    summary = summarize(fit, args.level, method=args.method)
    doc = summary.to_dict()
    doc.update({"n": data.n, "p": data.p})
    text = json.dumps(doc, indent=2)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if args.chains and args.method != "ols":
        _write_chains(args.chains, fit)
    return EXIT_OK


def _vec(doc: dict, key: str, p: int):
    if key not in doc:
        return None
    v = np.asarray(doc[key], dtype=float).ravel()
    if v.size != p:
        raise CliError(f"{key} has length {v.size}, expected p={p}", EXIT_INPUT)
    return v


def cmd_diagnose(args) -> int:
    data, _ = _load(args)
    try:
        with open(args.coef, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot read coefficient file: {e}", EXIT_INPUT) from None
    beta, bc, bd = (_vec(doc, k, data.p) for k in ("beta", "beta_c", "beta_d"))
    alpha = doc.get("alpha")
    if beta is None and bc is not None and bd is not None and alpha is not None:
        beta = bd - alpha * bc
    if beta is None and bd is None:
        raise CliError("coefficient file needs beta, or beta_c and beta_d", EXIT_INPUT)

    print(f"n={data.n} p={data.p}")
    rows = []
    if beta is not None:
        rows.append(("ridge_alpha_bias", diagnostics.ridge_alpha_bias(data.z, data.X, beta)))
    if bc is not None and bd is not None:
        rows.append(("reparam_alpha_bias", diagnostics.reparam_alpha_bias(data.z, data.X, bc, bd)))
    if alpha is not None and beta is not None:
        resid = data.y - alpha * data.z - data.X @ beta
        rows.append(("residual_treatment_cov", diagnostics.residual_treatment_cov(resid, data.z)))
    try:
        ols = fit_ols(data.y, data.z, data.X)
        rows.append(("ols_residual_treatment_cov", diagnostics.residual_treatment_cov(ols.residuals, data.z)))
    except (PreconditionError, RankDeficientError):
        pass
    width = max(len(r[0]) for r in rows)
    for name, val in rows:
        print(f"{name:<{width}}  {val: .12g}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (DataError, ScenarioError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (PreconditionError, RankDeficientError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (SliceCollapse, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
